use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{edge_count, planted_embeddings, tree_ideal_distances};
use crate::corpus::{
    parent_relation, parse_snippet, Language, Manifest, ManifestEntry, ParentRelationMatrix,
    SyntaxTree, TensorPaths,
};
use crate::tensorio::{write_tensor, SubwordAlignment, TensorBlob};
use crate::{Error, Result};

pub const SYNTH_ATTENTION_LAYERS: usize = 2;
pub const SYNTH_HEADS: usize = 3;
/// Embedding output plus two layers: noise, planted path indicators, and the
/// ideal-distance line.
pub const SYNTH_HIDDEN_LAYERS: usize = 3;

/// Which kind of snippets to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthFamily {
    /// Small Python functions with ordinary n-ary ASTs.
    Nary,
    /// Python expressions whose ASTs have at most two children per node, so
    /// ideal distances reproduce the gold pair set exactly.
    Binary,
}

impl FromStr for SynthFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nary" => Ok(SynthFamily::Nary),
            "binary" => Ok(SynthFamily::Binary),
            _ => Err(Error::InvalidArgument(format!("unknown synth family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub family: SynthFamily,
    pub count: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a word is split into two subwords.
    pub split_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            family: SynthFamily::Nary,
            count: 200,
            min_words: 5,
            max_words: 50,
            split_prob: 0.3,
            seed: 0,
        }
    }
}

const NAMES: &[&str] = &["x", "y", "data", "value", "items", "result", "count", "node", "key", "path", "line", "self"];
const ATTRS: &[&str] = &["append", "get", "strip", "split", "join", "size", "name", "parent", "update", "keys"];
const FUNCS: &[&str] = &["len", "print", "range", "sorted", "process", "check", "load", "isinstance"];
const OPS: &[&str] = &["+", "-", "*", "<", "==", "and", "or", "in"];

struct PyGen<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl PyGen<'_> {
    fn pick(&mut self, xs: &[&'static str]) -> &'static str {
        xs.choose(self.rng).expect("non-empty vocabulary")
    }

    fn args(&mut self, depth: usize) -> String {
        let k = self.rng.gen_range(0..3);
        (0..k).map(|_| self.expr(depth)).collect::<Vec<_>>().join(", ")
    }

    fn expr(&mut self, depth: usize) -> String {
        if depth == 0 {
            return if self.rng.gen_bool(0.8) {
                self.pick(NAMES).to_string()
            } else {
                self.rng.gen_range(0..100).to_string()
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..8) {
            0 => self.pick(NAMES).to_string(),
            1 => format!("{}({})", self.pick(FUNCS), self.args(d)),
            2 => format!("{}.{}", self.pick(NAMES), self.pick(ATTRS)),
            3 => format!("{}.{}({})", self.pick(NAMES), self.pick(ATTRS), self.args(d)),
            4 => format!("{} {} {}", self.expr(d), self.pick(OPS), self.expr(d)),
            5 => format!("[{}]", self.args(d)),
            6 => format!("{}[{}]", self.pick(NAMES), self.expr(d)),
            _ => format!("{}.{}", self.expr(d), self.pick(ATTRS)),
        }
    }

    fn stmt(&mut self, indent: usize, depth: usize, out: &mut Vec<String>) {
        let pad = "    ".repeat(indent);
        let choice = if depth == 0 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..6) };
        match choice {
            0 => out.push(format!("{pad}{} = {}", self.pick(NAMES), self.expr(2))),
            1 => out.push(format!("{pad}{} += {}", self.pick(NAMES), self.expr(1))),
            2 => out.push(format!("{pad}{}({})", self.pick(FUNCS), self.args(1))),
            3 => out.push(format!("{pad}return {}", self.expr(2))),
            4 => {
                out.push(format!("{pad}if {}:", self.expr(1)));
                self.stmt(indent + 1, depth - 1, out);
            }
            _ => {
                out.push(format!("{pad}for {} in {}:", self.pick(NAMES), self.expr(1)));
                self.stmt(indent + 1, depth - 1, out);
            }
        }
    }

    fn function(&mut self) -> String {
        let params: Vec<&str> = (0..self.rng.gen_range(0..3)).map(|_| self.pick(NAMES)).collect();
        let mut lines = vec![format!("def {}({}):", self.pick(FUNCS), params.join(", "))];
        for _ in 0..self.rng.gen_range(1..4) {
            self.stmt(1, 1, &mut lines);
        }
        lines.join("\n") + "\n"
    }
}

/// `[return] not* [-~+]* name ("()")*`: every AST node has at most two children.
fn binary_statement(rng: &mut ChaCha8Rng, budget: usize) -> String {
    let mut s = String::new();
    let mut used = 1;
    if budget >= 2 && rng.gen_bool(0.3) {
        s.push_str("return ");
        used += 1;
    }
    while used < budget && rng.gen_bool(0.4) {
        s.push_str("not ");
        used += 1;
    }
    while used < budget && rng.gen_bool(0.4) {
        s.push(*['-', '~', '+'].choose(rng).expect("non-empty"));
        used += 1;
    }
    s.push_str(NAMES[rng.gen_range(0..NAMES.len() - 1)]);
    while used + 2 <= budget {
        s.push_str("()");
        used += 2;
    }
    s
}

fn binary_source(rng: &mut ChaCha8Rng, target: usize) -> String {
    if target >= 6 && rng.gen_bool(0.3) {
        let first = rng.gen_range(3..=target - 3);
        format!("{}\n{}\n", binary_statement(rng, first), binary_statement(rng, target - first))
    } else {
        format!("{}\n", binary_statement(rng, target))
    }
}

fn generate_source(family: SynthFamily, config: &SynthConfig, seed: u64) -> Result<(String, SyntaxTree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let source = match family {
            SynthFamily::Nary => PyGen { rng: &mut rng }.function(),
            SynthFamily::Binary => {
                let target = rng.gen_range(config.min_words..=config.max_words);
                binary_source(&mut rng, target)
            }
        };
        let Ok(tree) = parse_snippet(&source, Language::Python) else {
            continue;
        };
        if (config.min_words..=config.max_words).contains(&tree.num_leaves()) {
            return Ok((source, tree));
        }
    }
    Err(Error::InvalidArgument(format!(
        "could not generate a snippet with {}..={} words",
        config.min_words, config.max_words
    )))
}

/// Word-level attention row: weights over words plus mass on [CLS] and [SEP].
struct Row {
    words: Vec<f64>,
    cls: f64,
    sep: f64,
}

fn word_rows(kind: usize, n: usize, rel: &ParentRelationMatrix) -> Vec<Row> {
    let uniform = |w: f64| vec![w / n as f64; n];
    (0..n)
        .map(|i| {
            let partners: Vec<usize> = (0..n).filter(|&j| rel.get(i, j)).collect();
            let syntactic = || {
                if partners.is_empty() {
                    Row { words: uniform(0.5), cls: 0.0, sep: 0.5 }
                } else {
                    let mut words = uniform(0.1);
                    for &j in &partners {
                        words[j] += 0.9 / partners.len() as f64;
                    }
                    Row { words, cls: 0.0, sep: 0.0 }
                }
            };
            match kind {
                // Parent-relation rows.
                0 => syntactic(),
                // Next token.
                1 => {
                    let mut words = vec![0.0; n];
                    let sep = if i + 1 < n {
                        words[i + 1] = 1.0;
                        0.0
                    } else {
                        1.0
                    };
                    Row { words, cls: 0.0, sep }
                }
                2 => Row { words: uniform(1.0), cls: 0.0, sep: 0.0 },
                // Previous token.
                3 => {
                    let mut words = vec![0.0; n];
                    let cls = if i > 0 {
                        words[i - 1] = 1.0;
                        0.0
                    } else {
                        1.0
                    };
                    Row { words, cls, sep: 0.0 }
                }
                4 => Row { words: uniform(0.1), cls: 0.9, sep: 0.0 },
                _ => {
                    let s = syntactic();
                    Row {
                        words: s.words.iter().map(|w| 0.5 * w + 0.5 / n as f64).collect(),
                        cls: 0.0,
                        sep: 0.5 * s.sep,
                    }
                }
            }
        })
        .collect()
}

struct Layout {
    align: SubwordAlignment,
    m: usize,
}

fn layout(n: usize, split_prob: f64, rng: &mut ChaCha8Rng) -> Layout {
    let mut words = Vec::with_capacity(n);
    let mut pos = 1;
    for _ in 0..n {
        let len = if rng.gen_bool(split_prob) { 2 } else { 1 };
        words.push([pos, pos + len]);
        pos += len;
    }
    Layout {
        align: SubwordAlignment { words, special: vec![0, pos] },
        m: pos + 1,
    }
}

fn attention_blob(tree: &SyntaxTree, lay: &Layout) -> Result<TensorBlob> {
    let n = tree.num_leaves();
    let m = lay.m;
    let rel = parent_relation(tree);
    let mut data = Vec::with_capacity(SYNTH_ATTENTION_LAYERS * SYNTH_HEADS * m * m);
    for kind in 0..SYNTH_ATTENTION_LAYERS * SYNTH_HEADS {
        let rows = word_rows(kind, n, &rel);
        let mut mat = vec![0f32; m * m];
        // [CLS] attends uniformly, [SEP] to itself.
        mat[..m].iter_mut().for_each(|x| *x = 1.0 / m as f32);
        mat[(m - 1) * m + m - 1] = 1.0;
        for (i, &[rs, re]) in lay.align.words.iter().enumerate() {
            for s in rs..re {
                let out = &mut mat[s * m..(s + 1) * m];
                out[0] = rows[i].cls as f32;
                out[m - 1] = rows[i].sep as f32;
                for (j, &[cs, ce]) in lay.align.words.iter().enumerate() {
                    let share = rows[i].words[j] / (ce - cs) as f64;
                    out[cs..ce].iter_mut().for_each(|x| *x = share as f32);
                }
            }
        }
        data.extend(mat);
    }
    TensorBlob::new(
        vec![SYNTH_ATTENTION_LAYERS as u64, SYNTH_HEADS as u64, m as u64, m as u64],
        data,
    )
}

fn hidden_blob(tree: &SyntaxTree, lay: &Layout, dim: usize, rng: &mut ChaCha8Rng) -> Result<TensorBlob> {
    let m = lay.m;
    let mut data = vec![0f32; SYNTH_HIDDEN_LAYERS * m * dim];
    data[..m * dim].iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    let planted = planted_embeddings(tree, dim)?;
    let ideal = tree_ideal_distances(tree);
    let mut line = 0.0;
    for (i, &[s, e]) in lay.align.words.iter().enumerate() {
        if i > 0 {
            line += ideal[i - 1];
        }
        for t in s..e {
            let l1 = (m + t) * dim;
            data[l1..l1 + dim].copy_from_slice(&planted[i * dim..(i + 1) * dim]);
            data[(2 * m + t) * dim] = line as f32;
        }
    }
    TensorBlob::new(vec![SYNTH_HIDDEN_LAYERS as u64, m as u64, dim as u64], data)
}

/// Writes a synthetic corpus under `dir`: `manifest.json`, sources in `src/`
/// and tensors plus subword alignments in `tensors/`.
///
/// Attention layer 0 has a parent-relation head (every weight above 0.3
/// falls on a related pair), a next-token head and a uniform head; layer 1
/// has previous-token, [CLS]-sink and mixed heads. Hidden layer 0 is seeded
/// noise, layer 1 holds path-indicator embeddings (squared distances equal
/// tree distances) and layer 2 places words on a line so that adjacent L1/L2
/// distances equal the ideal syntactic distances.
pub fn generate_corpus(dir: &Path, config: &SynthConfig) -> Result<Manifest> {
    if config.min_words < 2 || config.min_words > config.max_words {
        return Err(Error::InvalidArgument(format!(
            "invalid word range {}..={}",
            config.min_words, config.max_words
        )));
    }
    if !(0.0..=1.0).contains(&config.split_prob) {
        return Err(Error::InvalidArgument("split_prob must lie in [0, 1]".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.count).map(|_| master.gen()).collect();
    let snippets: Vec<(String, SyntaxTree)> = seeds
        .par_iter()
        .map(|&s| generate_source(config.family, config, s))
        .collect::<Result<_>>()?;
    let dim = snippets.iter().map(|(_, t)| edge_count(t)).max().unwrap_or(0).max(1);

    for sub in ["src", "tensors"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let entries: Vec<ManifestEntry> = snippets
        .par_iter()
        .zip(&seeds)
        .enumerate()
        .map(|(k, ((source, tree), &seed))| {
            let id = format!("synth-{k:04}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let lay = layout(tree.num_leaves(), config.split_prob, &mut rng);
            let src = format!("src/{id}.py");
            let attn = format!("tensors/{id}.attn.sct");
            let hidden = format!("tensors/{id}.hidden.sct");
            let align = format!("tensors/{id}.align.json");
            let src_path = dir.join(&src);
            fs::write(&src_path, source).map_err(|e| Error::io(&src_path, e))?;
            write_tensor(&dir.join(&attn), &attention_blob(tree, &lay)?)?;
            write_tensor(&dir.join(&hidden), &hidden_blob(tree, &lay, dim, &mut rng)?)?;
            lay.align.write(&dir.join(&align))?;
            Ok(ManifestEntry {
                id,
                language: Language::Python.to_string(),
                source_file: src,
                tensors: TensorPaths {
                    attention: Some(attn),
                    hidden: Some(hidden),
                    alignment: Some(align),
                },
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest { snippets: entries };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}
