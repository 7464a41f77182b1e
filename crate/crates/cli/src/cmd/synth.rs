use std::path::Path;

use astprobe::synth::{generate_corpus, SynthConfig, SynthFamily};

use crate::settings::Settings;
use crate::BadInput;

pub fn synth_gen(settings: &Settings, out_dir: &Path) -> anyhow::Result<()> {
    let d = SynthConfig::default();
    let family = match settings.get("family", "nary".to_string())?.parse::<SynthFamily>() {
        Ok(f) => f,
        Err(e) => return Err(BadInput(e.to_string()).into()),
    };
    let config = SynthConfig {
        family,
        count: settings.get("count", d.count)?,
        min_words: settings.get("min_words", d.min_words)?,
        max_words: settings.get("max_words", d.max_words)?,
        split_prob: settings.get("split_prob", d.split_prob)?,
        seed: settings.get("seed", d.seed)?,
    };
    let manifest = generate_corpus(out_dir, &config)?;
    println!(
        "wrote {} snippets to {}",
        manifest.snippets.len(),
        out_dir.join("manifest.json").display()
    );
    Ok(())
}
