use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

use crate::settings::Settings;

/// SHA-256 over a sequence of input files, each prefixed by its position and
/// length so that moving bytes between files changes the digest.
#[derive(Default)]
pub struct InputHash {
    hasher: Sha256,
    files: u64,
}

impl InputHash {
    pub fn add_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.add_bytes(&bytes);
        Ok(())
    }

    pub fn add_bytes(&mut self, bytes: &[u8]) {
        self.hasher.update(self.files.to_le_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
        self.files += 1;
    }

    pub fn hex(&self) -> String {
        format!("{:x}", self.hasher.clone().finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// A text report: `#` header lines followed by a body.
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(command: &str, settings: &Settings, input_hash: &str) -> Self {
        let mut text = format!("# astprobe {} {command}\n", env!("CARGO_PKG_VERSION"));
        for kv in settings.resolved() {
            text.push_str(&format!("# config {kv}\n"));
        }
        text.push_str(&format!("# input_sha256 {input_hash}\n"));
        Report { text }
    }

    pub fn note(&mut self, line: &str) {
        self.text.push_str("# ");
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn line(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, &self.text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Six-decimal rendering; `None` becomes an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
