use std::fmt::Write;
use std::fs;
use std::path::Path;

use anyhow::Context;

use crate::output::InputHash;
use crate::BadInput;

/// Published reference figures, shown next to local results for orientation.
const REF_ALIGNMENT: &[(&str, &str)] = &[
    ("CodeBERT, layer 11 head 1", "67.25%"),
    ("GraphCodeBERT, layer 12 head 9", "59%"),
];
const REF_PROBE: &[(&str, &str)] = &[
    ("CodeBERT-0", "0.60"),
    ("CodeBERT-1", "0.69"),
    ("CodeBERT-5", "0.85"),
    ("GraphCodeBERT-5", "0.86"),
];
const REF_INDUCTION: &[(&str, &str)] = &[
    ("Random Trees", "16.93"),
    ("Balanced Trees", "16.79"),
    ("Left Branching Trees", "18.49"),
    ("Right Branching Trees", "26.36"),
    ("CodeBERT-0", "19.13"),
    ("CodeBERT, JSD, layer 8, AVG", "45.37"),
    ("GraphCodeBERT, HEL, layer 8, head 10", "51.34"),
    ("CodeBERT, HEL, layer 9, AVG, λ = 1", "50.18"),
    ("GraphCodeBERT, HEL, layer 9, AVG, λ = 1", "54.80"),
];

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn read_csv(path: &Path, hash: &mut InputHash) -> anyhow::Result<Option<Csv>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    hash.add_bytes(text.as_bytes());
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let Some(header) = lines.next() else {
        return Err(BadInput(format!("{} has no header row", path.display())).into());
    };
    let split = |l: &str| l.split(',').map(String::from).collect::<Vec<_>>();
    Ok(Some(Csv {
        header: split(header),
        rows: lines.map(split).collect(),
    }))
}

fn percent(raw: &str) -> String {
    raw.parse::<f64>()
        .map(|v| format!("{:.2}", 100.0 * v))
        .unwrap_or_else(|_| "n/a".into())
}

/// Collects the reports found in `out_dir` into `summary.md`.
pub fn report(out_dir: &Path) -> anyhow::Result<()> {
    let mut hash = InputHash::default();
    let align = read_csv(&out_dir.join("alignment.csv"), &mut hash)?;
    let probe = read_csv(&out_dir.join("probe_report.csv"), &mut hash)?;
    let induce = read_csv(&out_dir.join("induction_report.csv"), &mut hash)?;
    let baselines = read_csv(&out_dir.join("baselines.csv"), &mut hash)?;
    if align.is_none() && probe.is_none() && induce.is_none() && baselines.is_none() {
        return Err(BadInput(format!("no reports found in {}", out_dir.display())).into());
    }

    let mut md = String::from("# Analysis summary\n\n");
    writeln!(md, "Input reports sha256: `{}`", hash.hex())?;
    writeln!(md, "\nReference figures are published results on a different corpus and model; they are not expected to match.")?;

    if let Some(csv) = &align {
        md.push_str("\n## Attention alignment\n\n");
        let (l, h, p) = (csv.col("layer"), csv.col("head"), csv.col("p_align"));
        let best = csv
            .rows
            .iter()
            .filter_map(|r| Some((r, r.get(p?)?.parse::<f64>().ok()?)))
            .fold(None, |acc: Option<(&Vec<String>, f64)>, (r, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((r, v)),
            });
        match (best, l, h) {
            (Some((row, v)), Some(l), Some(h)) => writeln!(
                md,
                "Best head: layer {} head {}, {:.2}% of high-confidence attention aligned with the parent relation.",
                row[l],
                row[h],
                100.0 * v
            )?,
            _ => md.push_str("No head had enough high-confidence attention.\n"),
        }
        md.push_str("\n| Reference | Aligned |\n|---|---|\n");
        for (name, v) in REF_ALIGNMENT {
            writeln!(md, "| {name} | {v} |")?;
        }
    }

    if let Some(csv) = &probe {
        md.push_str("\n## Structural probe\n\n");
        let dspr = csv
            .rows
            .iter()
            .find(|r| r.first().map(String::as_str) == Some("dspr"))
            .and_then(|r| r.get(1))
            .filter(|v| !v.is_empty())
            .cloned()
            .unwrap_or_else(|| "n/a".into());
        writeln!(md, "DSpr (mean Spearman over lengths 5 to 50): {dspr}")?;
        md.push_str("\n| Reference | DSpr |\n|---|---|\n");
        for (name, v) in REF_PROBE {
            writeln!(md, "| {name} | {v} |")?;
        }
    }

    let tables: Vec<&Csv> = [&induce, &baselines].into_iter().flatten().collect();
    if !tables.is_empty() {
        md.push_str("\n## Tree induction\n\n| Model | Source | f | Layer | Head | λ | F1 |\n|---|---|---|---|---|---|---|\n");
        for csv in tables {
            let cols = ["model", "source", "fn", "layer", "head", "lambda", "f1"].map(|c| csv.col(c));
            for row in &csv.rows {
                let cell = |k: usize| cols[k].and_then(|c| row.get(c)).map(String::as_str).unwrap_or("");
                writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    cell(0),
                    cell(1),
                    cell(2),
                    cell(3),
                    cell(4),
                    cell(5),
                    percent(cell(6))
                )?;
            }
        }
        md.push_str("\n| Reference | F1 |\n|---|---|\n");
        for (name, v) in REF_INDUCTION {
            writeln!(md, "| {name} | {v} |")?;
        }
    }

    let path = out_dir.join("summary.md");
    fs::write(&path, md).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
