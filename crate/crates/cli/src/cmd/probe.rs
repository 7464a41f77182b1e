use std::path::Path;

use anyhow::Context;
use astprobe::corpus::{tree_distances, LoadedSnippet, DEFAULT_MAX_LEN};
use astprobe::probe::{
    eval_spearman, split_examples, train_probe_with_dev, ProbeConfig, ProbeExample, ProbeModel,
    SpearmanReport, SplitRecord,
};
use astprobe::tensorio::HiddenStates;
use astprobe::Error;

use crate::data::{load_inputs, with_hidden, Needs};
use crate::output::{ensure_dir, fmt, fmt_opt, sha256_hex, InputHash, Report};
use crate::settings::Settings;

const MODEL_FILE: &str = "probe.sct";

/// Probe examples for one hidden layer, plus the corpus language.
fn examples(
    settings: &Settings,
    manifest: &Path,
    layer: usize,
    hash: &mut InputHash,
) -> anyhow::Result<(Vec<ProbeExample>, String)> {
    let max_len = settings.get("max_len", DEFAULT_MAX_LEN)?;
    let inputs = load_inputs(
        manifest,
        max_len,
        Needs {
            hidden: true,
            ..Default::default()
        },
    )?;
    hash.add_bytes(inputs.hash.hex().as_bytes());
    let language = inputs.snippets[0].snippet.language.to_string();
    let examples = with_hidden(inputs.snippets)?
        .into_iter()
        .filter(|(s, _)| s.num_words() >= 2)
        .map(|(s, h)| to_example(&s, &h, layer))
        .collect::<anyhow::Result<_>>()?;
    Ok((examples, language))
}

fn to_example(s: &LoadedSnippet, h: &HiddenStates, layer: usize) -> anyhow::Result<ProbeExample> {
    if layer >= h.layers() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range: snippet {} has {} hidden layers",
            s.id(),
            h.layers()
        ))
        .into());
    }
    Ok(ProbeExample::new(s.id(), h.layer(layer).to_vec(), tree_distances(&s.tree))?)
}

fn write_report(report: &mut Report, result: &SpearmanReport) {
    report.note(&format!("skipped_constant_rows {}", result.skipped_rows));
    report.line("length,mean_spearman,count");
    for (n, stat) in &result.per_length {
        report.line(&format!("{n},{},{}", fmt(stat.mean_spearman), stat.count));
    }
    report.line(&format!("dspr,{},", fmt_opt(result.dspr)));
}

fn probe_config(settings: &Settings) -> anyhow::Result<ProbeConfig> {
    let d = ProbeConfig::default();
    Ok(ProbeConfig {
        rank: settings.get("rank", d.rank)?,
        max_code_len: settings.get("max_code_len", d.max_code_len)?,
        learning_rate: settings.get("learning_rate", d.learning_rate)?,
        batch_size: settings.get("batch_size", d.batch_size)?,
        max_epochs: settings.get("epochs", d.max_epochs)?,
        max_halvings: settings.get("max_halvings", d.max_halvings)?,
        seed: settings.get("seed", d.seed)?,
        ..d
    })
}

pub fn train(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let layer: usize = settings.required("layer")?;
    let config = probe_config(settings)?;
    let model_name: String = settings.get("model_name", "unknown".to_string())?;
    let manifest: String = settings.required("manifest")?;
    let eval_manifest: Option<String> = settings.optional("eval_manifest")?;

    let mut hash = InputHash::default();
    let (all, language) = examples(settings, Path::new(&manifest), layer, &mut hash)?;
    let (train_idx, dev_idx, test_idx) = match eval_manifest {
        Some(_) => {
            let (t, d, _) = split_examples(all.len(), config.dev_fraction, 0.0, config.seed);
            (t, d, Vec::new())
        }
        None => split_examples(all.len(), config.dev_fraction, 0.1, config.seed),
    };
    let train: Vec<&ProbeExample> = train_idx
        .iter()
        .map(|&i| &all[i])
        .filter(|e| e.n() <= config.max_code_len)
        .collect();
    let dev: Vec<&ProbeExample> = dev_idx.iter().map(|&i| &all[i]).collect();
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet.into());
    }
    let dev = if dev.is_empty() { train.clone() } else { dev };
    let trained = train_probe_with_dev(&train, &dev, &config, layer)?;

    let (eval_set, eval_name) = match &eval_manifest {
        Some(path) => (examples(settings, Path::new(path), layer, &mut hash)?.0, "eval_manifest"),
        None => (test_idx.iter().map(|&i| all[i].clone()).collect(), "test_split"),
    };
    let mut model = trained.model;
    model.metadata.model_name = model_name;
    model.metadata.language = language;
    model.metadata.config_hash = sha256_hex(settings.resolved().join("\n").as_bytes());
    model.metadata.split = Some(SplitRecord {
        train: train.iter().map(|e| e.id.clone()).collect(),
        dev: dev_idx.iter().map(|&i| all[i].id.clone()).collect(),
        test: test_idx.iter().map(|&i| all[i].id.clone()).collect(),
    });

    ensure_dir(out_dir)?;
    model.save(&out_dir.join(MODEL_FILE))?;
    let hash = hash.hex();

    let mut history = Report::new("probe-train", settings, &hash);
    history.note(&format!("initial_dev_loss {}", fmt(trained.initial_dev_loss)));
    history.line("epoch,train_loss,dev_loss,learning_rate");
    for r in &trained.history {
        history.line(&format!("{},{},{},{:e}", r.epoch, fmt(r.train_loss), fmt(r.dev_loss), r.learning_rate));
    }
    history.write(out_dir, "probe_history.csv")?;

    let mut report = Report::new("probe-train", settings, &hash);
    report.note(&format!(
        "train {} dev {} eval {} ({eval_name})",
        train.len(),
        dev.len(),
        eval_set.len()
    ));
    report.note(&format!("best_dev_loss {}", fmt(trained.best_dev_loss)));
    if eval_set.is_empty() {
        log::warn!("no evaluation snippets; probe_report.csv has no rows");
        report.line("length,mean_spearman,count");
        report.line("dspr,,");
    } else {
        let result = eval_spearman(&model, &eval_set)?;
        write_report(&mut report, &result);
        println!("dspr {}", fmt_opt(result.dspr));
    }
    report.write(out_dir, "probe_report.csv")?;
    Ok(())
}

pub fn eval(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let model_path: String = settings.required("model")?;
    let model = ProbeModel::load(Path::new(&model_path))
        .with_context(|| format!("loading probe {model_path}"))?;
    let manifest: String = settings.required("manifest")?;
    let mut hash = InputHash::default();
    hash.add_file(Path::new(&model_path))?;
    let (set, _) = examples(settings, Path::new(&manifest), model.layer, &mut hash)?;
    let result = eval_spearman(&model, &set)?;
    ensure_dir(out_dir)?;
    let mut report = Report::new("probe-eval", settings, &hash.hex());
    report.note(&format!("layer {} rank {} snippets {}", model.layer, model.rank(), set.len()));
    write_report(&mut report, &result);
    report.write(out_dir, "probe_report.csv")?;
    println!("dspr {}", fmt_opt(result.dspr));
    Ok(())
}
