use std::fs;
use std::path::Path;

use anyhow::Context;
use astprobe::attnlens::{
    alignment_grid_svg, alignment_sweep, attention_heatmap, variability_sweep, AlignmentOptions,
    HeatmapMode, SnippetAttention, VariabilityTable, DEFAULT_MIN_COUNT, DEFAULT_PREFIX_LEN,
    DEFAULT_THRESHOLD,
};
use astprobe::corpus::{parent_relation, DEFAULT_MAX_LEN};
use astprobe::Error;

use crate::data::{load_inputs, with_attention, Needs};
use crate::output::{ensure_dir, fmt_opt, Report};
use crate::settings::Settings;

fn load(settings: &Settings) -> anyhow::Result<(Vec<SnippetAttention>, Vec<Vec<String>>, String)> {
    let manifest: String = settings.required("manifest")?;
    let max_len = settings.get("max_len", DEFAULT_MAX_LEN)?;
    let renormalize = settings.get("renormalize_rows", false)?;
    let inputs = load_inputs(
        Path::new(&manifest),
        max_len,
        Needs {
            attention: true,
            ..Default::default()
        },
    )?;
    let hash = inputs.hash.hex();
    let pairs = with_attention(inputs.snippets, renormalize)?;
    let words = pairs
        .iter()
        .map(|(s, _)| s.snippet.words.iter().map(|w| w.text.clone()).collect())
        .collect();
    let snippets = pairs
        .into_iter()
        .map(|(s, attention)| SnippetAttention {
            id: s.id().to_string(),
            relation: parent_relation(&s.tree),
            attention,
        })
        .collect();
    Ok((snippets, words, hash))
}

fn variability_or_none(snippets: &[SnippetAttention], prefix_len: usize) -> anyhow::Result<Option<VariabilityTable>> {
    match variability_sweep(snippets, prefix_len) {
        Ok(t) => Ok(Some(t)),
        Err(Error::InsufficientData(msg)) => {
            log::warn!("variability not computed: {msg}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn align(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let opts = AlignmentOptions {
        threshold: settings.get("threshold", DEFAULT_THRESHOLD)?,
        include_diagonal: settings.get("include_diagonal", false)?,
        min_count: settings.get("min_count", DEFAULT_MIN_COUNT)?,
    };
    let prefix_len = settings.get("prefix_len", DEFAULT_PREFIX_LEN)?;
    let (snippets, words, hash) = load(settings)?;
    let table = alignment_sweep(&snippets, &opts)?;
    let var = variability_or_none(&snippets, prefix_len)?;

    ensure_dir(out_dir)?;
    let mut report = Report::new("align", settings, &hash);
    report.note(&format!("snippets {}", snippets.len()));
    report.line("layer,head,num_high_conf,p_align,variability");
    for c in &table.cells {
        let v = var.as_ref().and_then(|t| t.get(c.layer, c.head));
        report.line(&format!(
            "{},{},{},{},{}",
            c.layer,
            c.head,
            c.num_high_conf,
            fmt_opt(c.p_align),
            fmt_opt(v)
        ));
    }
    report.write(out_dir, "alignment.csv")?;

    let heatmaps = out_dir.join("heatmaps");
    ensure_dir(&heatmaps)?;
    let grid = heatmaps.join("alignment_grid.svg");
    fs::write(&grid, alignment_grid_svg(&table)).with_context(|| format!("writing {}", grid.display()))?;
    if let Some(best) = table.best() {
        let first = &snippets[0];
        let svg = attention_heatmap(&first.attention, &words[0], best.layer, HeatmapMode::Head(best.head))?;
        let name = format!("attention_{}_l{}_h{}.svg", sanitize(&first.id), best.layer, best.head);
        let path = heatmaps.join(name);
        fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "best head: layer {} head {} p_align {}",
            best.layer,
            best.head,
            fmt_opt(best.p_align)
        );
    } else {
        println!("no head reached {} high-confidence weights", opts.min_count);
    }
    Ok(())
}

pub fn variability(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let prefix_len = settings.get("prefix_len", DEFAULT_PREFIX_LEN)?;
    let (snippets, _, hash) = load(settings)?;
    let table = variability_sweep(&snippets, prefix_len)?;
    ensure_dir(out_dir)?;
    let mut report = Report::new("variability", settings, &hash);
    report.note(&format!("included_snippets {}", table.included));
    report.line("layer,head,variability");
    for l in 0..table.layers {
        for h in 0..table.heads {
            report.line(&format!("{l},{h},{}", fmt_opt(table.get(l, h))));
        }
    }
    report.write(out_dir, "variability.csv")?;
    Ok(())
}

/// File-name-safe version of a snippet id.
fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
