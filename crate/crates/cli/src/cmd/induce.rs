use std::collections::BTreeMap;
use std::path::Path;

use astprobe::corpus::{gold_pair_set, LabeledPairSet, LoadedSnippet, PairMode, DEFAULT_MAX_LEN};
use astprobe::induce::{
    baseline_tree, build_tree, f1, inject_bias, per_label_counts, syntactic_distances, tree_to_pairs,
    Baseline, BiasVariant, BinaryTree, DistanceFn, DistanceSource, HeadSelector, LabelCount,
};
use astprobe::tensorio::{AttentionTensor, HiddenStates};
use astprobe::Error;
use rayon::prelude::*;

use crate::data::{load_inputs, with_attention, with_hidden, Needs};
use crate::output::{ensure_dir, fmt, Report};
use crate::settings::Settings;
use crate::BadInput;

pub const DEFAULT_LABELS: &str = "parameters,attribute,argument_list,list,assignment,expression_statement";
const BASELINES: [&str; 4] = ["random", "balanced", "left-branching", "right-branching"];

/// Per-snippet seed for everything random in induction and scoring.
fn snippet_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index as u64)
}

fn pair_mode(settings: &Settings, seed: u64, index: usize) -> anyhow::Result<PairMode> {
    match settings.get("pair_mode", "leftmost".to_string())?.as_str() {
        "leftmost" => Ok(PairMode::Leftmost),
        "random" => Ok(PairMode::SeededRandom(snippet_seed(seed, index))),
        other => Err(BadInput(format!("pair_mode must be leftmost or random, got `{other}`")).into()),
    }
}

/// Scores summed over snippets: F1/P/R are macro-averaged, label recall is
/// pooled over all gold pairs.
#[derive(Default)]
struct Tally {
    snippets: usize,
    f1: f64,
    precision: f64,
    recall: f64,
    labels: BTreeMap<String, LabelCount>,
}

impl Tally {
    fn add(&mut self, gold: &LabeledPairSet, tree: &BinaryTree, mode: PairMode) {
        let predicted = tree_to_pairs(tree, mode);
        let s = f1(&gold.unlabeled(), &predicted);
        self.snippets += 1;
        self.f1 += s.f1;
        self.precision += s.precision;
        self.recall += s.recall;
        for (label, c) in per_label_counts(gold, &predicted) {
            let t = self.labels.entry(label).or_default();
            t.matched += c.matched;
            t.total += c.total;
        }
    }

    fn row(&self, prefix: &str, labels: &[String]) -> String {
        let n = self.snippets.max(1) as f64;
        let mut row = format!(
            "{prefix},{},{},{}",
            fmt(self.f1 / n),
            fmt(self.precision / n),
            fmt(self.recall / n)
        );
        for l in labels {
            row.push(',');
            if let Some(r) = self.labels.get(l).and_then(LabelCount::recall) {
                row.push_str(&fmt(r));
            }
        }
        row
    }
}

fn labels(settings: &Settings) -> anyhow::Result<Vec<String>> {
    let raw: String = settings.get("labels", DEFAULT_LABELS.to_string())?;
    Ok(raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
}

fn header(labels: &[String]) -> String {
    let mut h = "model,source,fn,layer,head,lambda,f1,precision,recall".to_string();
    for l in labels {
        h.push(',');
        h.push_str(l);
    }
    h
}

fn baseline_kind(name: &str, seed: u64) -> Baseline {
    match name {
        "random" => Baseline::Random(seed),
        "balanced" => Baseline::Balanced,
        "left-branching" => Baseline::LeftBranching,
        _ => Baseline::RightBranching,
    }
}

/// One baseline row per structural baseline over `snippets`.
fn baseline_rows(settings: &Settings, snippets: &[&LoadedSnippet], seed: u64, labels: &[String]) -> anyhow::Result<Vec<String>> {
    let modes: Vec<PairMode> = (0..snippets.len())
        .map(|i| pair_mode(settings, seed, i))
        .collect::<anyhow::Result<_>>()?;
    BASELINES
        .iter()
        .map(|name| {
            let mut tally = Tally::default();
            for (i, s) in snippets.iter().enumerate() {
                let tree = baseline_tree(s.num_words(), baseline_kind(name, snippet_seed(seed, i)))?;
                tally.add(&gold_pair_set(&s.tree, modes[i]), &tree, modes[i]);
            }
            Ok(tally.row(&format!("{name},-,-,-,-,-"), labels))
        })
        .collect()
}

enum Loaded {
    Attention(Vec<(LoadedSnippet, AttentionTensor)>),
    Hidden(Vec<(LoadedSnippet, HiddenStates)>),
}

pub fn induce(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let manifest: String = settings.required("manifest")?;
    let max_len = settings.get("max_len", DEFAULT_MAX_LEN)?;
    let seed = settings.get("seed", 0u64)?;
    let source: String = settings.get("source", "attention".to_string())?;
    let layer: usize = settings.required("layer")?;
    let default_fn = if source == "hidden" { DistanceFn::L2 } else { DistanceFn::Jsd };
    let function = settings.get("fn", default_fn)?;
    let head = match source.as_str() {
        "attention" => {
            let raw: String = settings.get("head", "avg".to_string())?;
            if raw.eq_ignore_ascii_case("avg") {
                HeadSelector::Mean
            } else {
                HeadSelector::Head(raw.parse().map_err(|_| BadInput(format!("head must be an index or avg, got `{raw}`")))?)
            }
        }
        "hidden" => HeadSelector::Mean,
        other => return Err(BadInput(format!("source must be attention or hidden, got `{other}`")).into()),
    };
    let lambda = settings.get("lambda", 1.0f64)?;
    let bias = match settings.get("bias", "ramp".to_string())?.as_str() {
        "ramp" => BiasVariant::Ramp,
        "literal" => BiasVariant::Literal,
        other => return Err(BadInput(format!("bias must be ramp or literal, got `{other}`")).into()),
    };
    let with_baselines = settings.get("baselines", false)?;
    let labels = labels(settings)?;

    let needs = Needs {
        attention: source == "attention",
        hidden: source == "hidden",
    };
    let inputs = load_inputs(Path::new(&manifest), max_len, needs)?;
    let hash = inputs.hash.hex();
    let loaded = if needs.attention {
        Loaded::Attention(with_attention(inputs.snippets, false)?)
    } else {
        Loaded::Hidden(with_hidden(inputs.snippets)?)
    };
    let count = match &loaded {
        Loaded::Attention(v) => v.len(),
        Loaded::Hidden(v) => v.len(),
    };
    let induced: Vec<Option<BinaryTree>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (snippet, src) = match &loaded {
                Loaded::Attention(v) => (&v[i].0, DistanceSource::Attention { attention: &v[i].1, layer, head }),
                Loaded::Hidden(v) => (&v[i].0, DistanceSource::Hidden { states: &v[i].1, layer }),
            };
            let d = match syntactic_distances(src, function) {
                Ok(d) => d,
                Err(Error::ZeroMassDistribution) => {
                    log::warn!("skipping snippet {}: attention row with zero mass", snippet.id());
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let words: Vec<usize> = (0..snippet.num_words()).collect();
            build_tree(&words, &inject_bias(&d, lambda, bias)).map(Some)
        })
        .collect::<astprobe::Result<_>>()?;
    let snippets: Vec<&LoadedSnippet> = match &loaded {
        Loaded::Attention(v) => v.iter().map(|p| &p.0).collect(),
        Loaded::Hidden(v) => v.iter().map(|p| &p.0).collect(),
    };

    let mut tally = Tally::default();
    let mut trees = String::new();
    let mut scored: Vec<&LoadedSnippet> = Vec::new();
    for (i, (s, tree)) in snippets.iter().zip(&induced).enumerate() {
        let Some(tree) = tree else { continue };
        let mode = pair_mode(settings, seed, i)?;
        tally.add(&gold_pair_set(&s.tree, mode), tree, mode);
        trees.push_str(&format!("{}\t{}\n", s.id(), tree.to_sexpr()));
        scored.push(s);
    }
    if scored.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }

    ensure_dir(out_dir)?;
    let mut report = Report::new("induce", settings, &hash);
    report.note(&format!("snippets {} skipped {}", scored.len(), snippets.len() - scored.len()));
    report.line(&header(&labels));
    let head_col = if needs.hidden { "-".to_string() } else { head.to_string() };
    report.line(&tally.row(&format!("induced,{source},{function},{layer},{head_col},{lambda}"), &labels));
    if with_baselines {
        for row in baseline_rows(settings, &scored, seed, &labels)? {
            report.line(&row);
        }
    }
    report.write(out_dir, "induction_report.csv")?;
    let trees_path = out_dir.join("trees.txt");
    std::fs::write(&trees_path, trees).map_err(|e| anyhow::anyhow!("writing {}: {e}", trees_path.display()))?;
    println!("f1 {}", fmt(tally.f1 / tally.snippets as f64));
    Ok(())
}

pub fn baselines(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let manifest: String = settings.required("manifest")?;
    let max_len = settings.get("max_len", DEFAULT_MAX_LEN)?;
    let seed = settings.get("seed", 0u64)?;
    let labels = labels(settings)?;
    let inputs = load_inputs(Path::new(&manifest), max_len, Needs::default())?;
    let snippets: Vec<&LoadedSnippet> = inputs.snippets.iter().collect();
    let rows = baseline_rows(settings, &snippets, seed, &labels)?;
    ensure_dir(out_dir)?;
    let mut report = Report::new("baselines", settings, &inputs.hash.hex());
    report.note(&format!("snippets {}", snippets.len()));
    report.line(&header(&labels));
    for row in rows {
        report.line(&row);
    }
    report.write(out_dir, "baselines.csv")?;
    Ok(())
}
