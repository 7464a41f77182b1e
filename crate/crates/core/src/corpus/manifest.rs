use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::parse::{parse_snippet, parse_snippet_lenient, CodeSnippet, Language};
use super::tree::SyntaxTree;
use crate::{Error, Result};

/// Default word budget per snippet.
pub const DEFAULT_MAX_LEN: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorPaths {
    #[serde(default)]
    pub attention: Option<String>,
    #[serde(default)]
    pub hidden: Option<String>,
    #[serde(default)]
    pub alignment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub language: String,
    pub source_file: String,
    #[serde(default)]
    pub tensors: TensorPaths,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub snippets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::ManifestSchema(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A parsed snippet plus resolved tensor locations.
#[derive(Debug, Clone)]
pub struct LoadedSnippet {
    pub snippet: CodeSnippet,
    pub tree: SyntaxTree,
    pub attention: Option<PathBuf>,
    pub hidden: Option<PathBuf>,
    pub alignment: Option<PathBuf>,
    /// Set when the snippet was cut down to the word budget.
    pub truncated: bool,
}

impl LoadedSnippet {
    pub fn id(&self) -> &str {
        &self.snippet.id
    }

    pub fn num_words(&self) -> usize {
        self.tree.num_leaves()
    }

    /// Re-derives the snippet from its first `max_words` words. No-op when
    /// the snippet is already short enough.
    pub fn truncate(&mut self, max_words: usize) -> Result<()> {
        if self.tree.num_leaves() <= max_words {
            return Ok(());
        }
        let (source, tree) = truncate_source(&self.snippet.source, &self.tree, self.snippet.language, max_words)?;
        self.snippet = CodeSnippet::from_tree(self.snippet.id.clone(), self.snippet.language, source, &tree);
        self.tree = tree;
        self.truncated = true;
        Ok(())
    }
}

/// Cuts `source` after its `max_words`-th word and re-parses the prefix.
///
/// A truncated prefix is usually not valid code, so the re-parse keeps error
/// recovery nodes. Re-tokenization can occasionally yield more words than
/// requested, in which case the cut is repeated.
pub fn truncate_source(
    source: &str,
    tree: &SyntaxTree,
    language: Language,
    max_words: usize,
) -> Result<(String, SyntaxTree)> {
    if max_words == 0 {
        return Err(Error::InvalidArgument("cannot truncate to zero words".into()));
    }
    let mut text = source.to_string();
    let mut current = tree.clone();
    while current.num_leaves() > max_words {
        let cut = current.node(current.leaf(max_words - 1)).span.end;
        text.truncate(cut);
        current = parse_snippet_lenient(&text, language)?;
    }
    Ok((text, current))
}

/// Options controlling corpus loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub max_len: usize,
    /// Snippets with fewer words are skipped.
    pub min_words: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_len: DEFAULT_MAX_LEN,
            min_words: 2,
        }
    }
}

/// A corpus manifest opened for reading. Iteration follows manifest order.
#[derive(Debug, Clone)]
pub struct Corpus {
    manifest: Manifest,
    base_dir: PathBuf,
    options: LoadOptions,
}

impl Corpus {
    pub fn open(manifest_path: &Path, options: LoadOptions) -> Result<Self> {
        let manifest = Manifest::read(manifest_path)?;
        let base_dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        for entry in &manifest.snippets {
            entry.language.parse::<Language>()?;
        }
        Ok(Corpus {
            manifest,
            base_dir,
            options,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    /// Loads one manifest entry. `Ok(None)` means the snippet was skipped
    /// (unparsable or too short); the reason is logged.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<Option<LoadedSnippet>> {
        let language: Language = entry.language.parse()?;
        let path = self.resolve(&entry.source_file);
        let source = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let tree = match parse_snippet(&source, language) {
            Ok(tree) => tree,
            Err(err) => {
                log::warn!("skipping snippet {}: {err}", entry.id);
                return Ok(None);
            }
        };
        let mut loaded = LoadedSnippet {
            snippet: CodeSnippet::from_tree(entry.id.clone(), language, source, &tree),
            tree,
            attention: entry.tensors.attention.as_deref().map(|p| self.resolve(p)),
            hidden: entry.tensors.hidden.as_deref().map(|p| self.resolve(p)),
            alignment: entry.tensors.alignment.as_deref().map(|p| self.resolve(p)),
            truncated: false,
        };
        loaded.truncate(self.options.max_len)?;
        if loaded.num_words() < self.options.min_words {
            log::warn!(
                "skipping snippet {}: {} words, need at least {}",
                entry.id,
                loaded.num_words(),
                self.options.min_words
            );
            return Ok(None);
        }
        Ok(Some(loaded))
    }

    /// Streams loaded snippets in manifest order, skipping unusable ones.
    pub fn iter(&self) -> impl Iterator<Item = Result<LoadedSnippet>> + '_ {
        self.manifest
            .snippets
            .iter()
            .filter_map(move |entry| self.load_entry(entry).transpose())
    }

    pub fn load_all(&self) -> Result<Vec<LoadedSnippet>> {
        self.iter().collect()
    }
}

/// Opens `manifest_path` and loads every usable snippet.
pub fn load_corpus(manifest_path: &Path, options: LoadOptions) -> Result<Vec<LoadedSnippet>> {
    Corpus::open(manifest_path, options)?.load_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_corpus(dir: &Path, sources: &[(&str, &str)]) -> PathBuf {
        let mut manifest = Manifest::default();
        for (id, src) in sources {
            let file = format!("{id}.py");
            fs::write(dir.join(&file), src).unwrap();
            manifest.snippets.push(ManifestEntry {
                id: id.to_string(),
                language: "python".into(),
                source_file: file,
                tensors: TensorPaths::default(),
            });
        }
        let path = dir.join("manifest.json");
        manifest.write(&path).unwrap();
        path
    }

    #[test]
    fn skips_unparsable_snippets() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_corpus(
            dir.path(),
            &[
                ("a", "x = 1\n"),
                ("b", "def f(:\n"),
                ("c", "return y\n"),
                ("d", "print(z)\n"),
            ],
        );
        let loaded = load_corpus(&path, LoadOptions::default()).unwrap();
        let ids: Vec<_> = loaded.iter().map(|s| s.id()).collect();
        assert_eq!(ids, ["a", "c", "d"]);
    }

    #[test]
    fn empty_manifest_is_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_corpus(dir.path(), &[]);
        assert!(load_corpus(&path, LoadOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn truncates_long_snippets() {
        // 200 statements of three words plus a newline-free layout: 600 words.
        let source: String = (0..200).map(|i| format!("x{i} = {i}\n")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = write_corpus(dir.path(), &[("long", &source)]);
        let loaded = load_corpus(&path, LoadOptions::default()).unwrap();
        let snippet = &loaded[0];
        assert!(snippet.truncated);
        assert_eq!(snippet.num_words(), 512);
        assert_eq!(snippet.snippet.words.len(), 512);
        // 170 full statements (510 words) then `x170 =`.
        assert_eq!(snippet.snippet.words[510].text, "x170");
        assert_eq!(snippet.snippet.words[511].text, "=");
        assert!(snippet.snippet.source.ends_with("x170 ="));
    }

    #[test]
    fn schema_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(&path, r#"{"snippets": [{"id": "a"}]}"#).unwrap();
        assert!(matches!(
            Corpus::open(&path, LoadOptions::default()),
            Err(Error::ManifestSchema(_))
        ));
        assert!(matches!(
            Corpus::open(&dir.path().join("missing.json"), LoadOptions::default()),
            Err(Error::Io { .. })
        ));
    }
}
