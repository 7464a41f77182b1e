//! Run settings resolved from defaults, an optional `key = value` file and
//! command-line flags, in increasing order of precedence.
//!
//! Config file format: one `key = value` per line; blank lines and lines
//! starting with `#` are ignored. Keys use underscores (`min_count`), matching
//! the long flags with dashes replaced.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};

use crate::BadInput;

/// Keys that may appear in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "baselines",
    "batch_size",
    "bias",
    "count",
    "epochs",
    "eval_manifest",
    "family",
    "fn",
    "head",
    "include_diagonal",
    "labels",
    "lambda",
    "layer",
    "learning_rate",
    "manifest",
    "max_code_len",
    "max_halvings",
    "max_len",
    "max_words",
    "min_count",
    "min_words",
    "model",
    "model_name",
    "out_dir",
    "pair_mode",
    "prefix_len",
    "rank",
    "renormalize_rows",
    "seed",
    "source",
    "split_prob",
    "threshold",
    "workers",
];

/// Keys that never reach report headers: they name locations or control
/// scheduling, neither of which may change report bytes.
const UNRECORDED: &[&str] = &["eval_manifest", "manifest", "model", "out_dir", "workers"];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

pub fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(BadInput(format!("config line {}: expected `key = value`", lineno + 1)));
        };
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!(BadInput(format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn from_file(path: Option<&Path>) -> anyhow::Result<Self> {
        let values = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| BadInput(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings {
            values,
            used: RefCell::default(),
        })
    }

    /// Applies an explicit flag, which wins over the config file.
    pub fn set(&mut self, key: &str, value: Option<impl Display>) {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    fn record(&self, key: &str, value: String) {
        if !UNRECORDED.contains(&key) {
            self.used.borrow_mut().insert(key.to_string(), value);
        }
    }

    fn parse<T: FromStr>(&self, key: &str, raw: &str) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        raw.parse()
            .map_err(|e| BadInput(format!("invalid value `{raw}` for {key}: {e}")).into())
    }

    /// Value of `key`, or `default` when unset.
    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        let value = match self.values.get(key) {
            Some(raw) => self.parse(key, raw)?,
            None => default,
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    pub fn optional<T: FromStr + Display>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: Display,
    {
        let value = match self.values.get(key) {
            Some(raw) => Some(self.parse::<T>(key, raw)?),
            None => None,
        };
        if let Some(v) = &value {
            self.record(key, v.to_string());
        }
        Ok(value)
    }

    pub fn required<T: FromStr + Display>(&self, key: &str) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        match self.optional(key)? {
            Some(v) => Ok(v),
            None => bail!(BadInput(format!("missing required setting `{key}`"))),
        }
    }

    /// Resolved settings read so far, as sorted `key=value` strings.
    pub fn resolved(&self) -> Vec<String> {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut s = Settings {
            values: parse_config("# comment\nthreshold = 0.5\nmin-count=7\n\n").unwrap(),
            used: RefCell::default(),
        };
        s.set("min_count", Some(9));
        s.set("seed", None::<u64>);
        assert_eq!(s.get("threshold", 0.3f32).unwrap(), 0.5);
        assert_eq!(s.get("min_count", 100u64).unwrap(), 9);
        assert_eq!(s.get("seed", 4u64).unwrap(), 4);
        assert_eq!(s.resolved(), ["min_count=9", "seed=4", "threshold=0.5"]);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config("threshold 0.5").is_err());
        assert!(parse_config("colour = red").is_err());
        let s = Settings {
            values: parse_config("rank = many").unwrap(),
            used: RefCell::default(),
        };
        assert!(s.get("rank", 1usize).is_err());
        assert!(s.required::<usize>("layer").is_err());
    }
}
