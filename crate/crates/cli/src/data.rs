use std::path::{Path, PathBuf};

use astprobe::corpus::{Corpus, LoadOptions, LoadedSnippet};
use astprobe::tensorio::{load_attention, load_hidden, AttentionTensor, HiddenStates};
use astprobe::Error;
use rayon::prelude::*;

use crate::output::InputHash;

#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub attention: bool,
    pub hidden: bool,
}

pub struct Inputs {
    pub snippets: Vec<LoadedSnippet>,
    pub hash: InputHash,
}

/// Loads every usable snippet of `manifest` and hashes the manifest plus each
/// file the command will read.
pub fn load_inputs(manifest: &Path, max_len: usize, needs: Needs) -> anyhow::Result<Inputs> {
    let corpus = Corpus::open(
        manifest,
        LoadOptions {
            max_len,
            ..Default::default()
        },
    )?;
    let mut hash = InputHash::default();
    hash.add_file(manifest)?;
    if corpus.manifest().snippets.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    for entry in &corpus.manifest().snippets {
        hash.add_file(&corpus.resolve(&entry.source_file))?;
        let t = &entry.tensors;
        let wanted = [
            (needs.attention, &t.attention),
            (needs.hidden, &t.hidden),
            (needs.attention || needs.hidden, &t.alignment),
        ];
        for (want, path) in wanted {
            if let (true, Some(p)) = (want, path) {
                hash.add_file(&corpus.resolve(p))?;
            }
        }
    }
    let snippets = corpus.load_all()?;
    if snippets.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    Ok(Inputs { snippets, hash })
}

fn tensor_path<'a>(path: &'a Option<PathBuf>, id: &str, kind: &str) -> astprobe::Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::MissingTensor(format!("snippet {id} has no {kind} dump")))
}

/// Cuts the snippet and a tensor with `tensor_n` words to a common length.
/// Returns the word count to keep.
fn reconcile(snippet: &mut LoadedSnippet, tensor_n: usize) -> astprobe::Result<usize> {
    if tensor_n < snippet.num_words() {
        snippet.truncate(tensor_n)?;
    } else if tensor_n > snippet.num_words() && !snippet.truncated {
        return Err(Error::AlignmentMismatch(format!(
            "snippet {} has {} words but its dump has {tensor_n}",
            snippet.id(),
            snippet.num_words()
        )));
    }
    Ok(snippet.num_words())
}

/// Word-level attention for every snippet, in corpus order.
pub fn with_attention(
    snippets: Vec<LoadedSnippet>,
    renormalize_rows: bool,
) -> anyhow::Result<Vec<(LoadedSnippet, AttentionTensor)>> {
    Ok(snippets
        .into_par_iter()
        .map(|mut s| {
            let path = tensor_path(&s.attention, s.id(), "attention")?;
            let attn = load_attention(path, s.alignment.as_deref(), renormalize_rows)?;
            let n = reconcile(&mut s, attn.n())?;
            let attn = if n < attn.n() { attn.prefix(n) } else { attn };
            Ok((s, attn))
        })
        .collect::<astprobe::Result<_>>()?)
}

/// Word-level hidden states for every snippet, in corpus order.
pub fn with_hidden(snippets: Vec<LoadedSnippet>) -> anyhow::Result<Vec<(LoadedSnippet, HiddenStates)>> {
    Ok(snippets
        .into_par_iter()
        .map(|mut s| {
            let path = tensor_path(&s.hidden, s.id(), "hidden")?;
            let hidden = load_hidden(path, s.alignment.as_deref())?;
            let n = reconcile(&mut s, hidden.n())?;
            let hidden = if n < hidden.n() { hidden.prefix(n) } else { hidden };
            Ok((s, hidden))
        })
        .collect::<astprobe::Result<_>>()?)
}
