use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sct1::TensorBlob;
use crate::{Error, Result};

/// Maps words to half-open subword ranges; `special` lists [CLS]/[SEP]/pad
/// positions that belong to no word.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubwordAlignment {
    pub words: Vec<[usize; 2]>,
    #[serde(default)]
    pub special: Vec<usize>,
}

impl SubwordAlignment {
    /// One subword per word, no special tokens.
    pub fn identity(n: usize) -> Self {
        SubwordAlignment {
            words: (0..n).map(|i| [i, i + 1]).collect(),
            special: Vec::new(),
        }
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::AlignmentMismatch(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("alignment serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks the alignment against a subword sequence of length `m`: spans
    /// are non-empty, ascending and disjoint from the specials, and words and
    /// specials together cover `0..m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        let mismatch = |msg: String| Err(Error::AlignmentMismatch(msg));
        let mut owner = vec![false; m];
        let mut prev_end = 0;
        for (w, &[s, e]) in self.words.iter().enumerate() {
            if s >= e {
                return mismatch(format!("word {w} maps to no subwords ({s}..{e})"));
            }
            if s < prev_end {
                return mismatch(format!("word {w} span {s}..{e} overlaps or is out of order"));
            }
            if e > m {
                return mismatch(format!("word {w} span {s}..{e} exceeds {m} subwords"));
            }
            owner[s..e].iter_mut().for_each(|o| *o = true);
            prev_end = e;
        }
        for (k, &p) in self.special.iter().enumerate() {
            if k > 0 && self.special[k - 1] >= p {
                return mismatch("special positions must be strictly ascending".into());
            }
            if p >= m || owner[p] {
                return mismatch(format!("special position {p} is out of range or inside a word"));
            }
            owner[p] = true;
        }
        if let Some(gap) = owner.iter().position(|o| !o) {
            return mismatch(format!("subword {gap} belongs to no word or special token"));
        }
        Ok(())
    }
}

/// Word-level attention weights `[layer][head][n][n]`, row = attending word.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    layers: usize,
    heads: usize,
    n: usize,
    data: Vec<f32>,
}

impl AttentionTensor {
    pub fn new(layers: usize, heads: usize, n: usize, data: Vec<f32>) -> Result<Self> {
        let expected = layers * heads * n * n;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(AttentionTensor {
            layers,
            heads,
            n,
            data,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major `n × n` matrix for one head.
    pub fn matrix(&self, layer: usize, head: usize) -> &[f32] {
        let size = self.n * self.n;
        let start = (layer * self.heads + head) * size;
        &self.data[start..start + size]
    }

    pub fn get(&self, layer: usize, head: usize, i: usize, j: usize) -> f32 {
        self.matrix(layer, head)[i * self.n + j]
    }

    /// Arithmetic mean of all heads of `layer`.
    pub fn mean_over_heads(&self, layer: usize) -> Vec<f32> {
        let size = self.n * self.n;
        let mut acc = vec![0f64; size];
        for h in 0..self.heads {
            for (a, &x) in acc.iter_mut().zip(self.matrix(layer, h)) {
                *a += x as f64;
            }
        }
        acc.into_iter().map(|a| (a / self.heads as f64) as f32).collect()
    }

    /// Restriction to the first `n` words.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.n);
        let mut data = Vec::with_capacity(self.layers * self.heads * n * n);
        for l in 0..self.layers {
            for h in 0..self.heads {
                let m = self.matrix(l, h);
                for i in 0..n {
                    data.extend_from_slice(&m[i * self.n..i * self.n + n]);
                }
            }
        }
        AttentionTensor {
            layers: self.layers,
            heads: self.heads,
            n,
            data,
        }
    }
}

/// Word-level hidden states `[layer][n][d_model]`; layer 0 is the embedding output.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    layers: usize,
    n: usize,
    d_model: usize,
    data: Vec<f32>,
}

impl HiddenStates {
    pub fn new(layers: usize, n: usize, d_model: usize, data: Vec<f32>) -> Result<Self> {
        let expected = layers * n * d_model;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(HiddenStates {
            layers,
            n,
            d_model,
            data,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    /// Row-major `n × d_model` slice for one layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let size = self.n * self.d_model;
        &self.data[layer * size..(layer + 1) * size]
    }

    pub fn vector(&self, layer: usize, word: usize) -> &[f32] {
        let start = (layer * self.n + word) * self.d_model;
        &self.data[start..start + self.d_model]
    }

    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.n);
        let mut data = Vec::with_capacity(self.layers * n * self.d_model);
        for l in 0..self.layers {
            data.extend_from_slice(&self.layer(l)[..n * self.d_model]);
        }
        HiddenStates {
            layers: self.layers,
            n,
            d_model: self.d_model,
            data,
        }
    }
}

/// Converts subword attention `[L, H, m, m]` to word level.
///
/// Attention *to* a word is the sum over its subword columns; attention
/// *from* a word is the mean over its subword rows. Rows and columns of
/// special tokens are dropped. With `renormalize_rows` every non-zero word
/// row is rescaled to sum to one.
pub fn word_level_attention(
    sub: &TensorBlob,
    align: &SubwordAlignment,
    renormalize_rows: bool,
) -> Result<AttentionTensor> {
    let dims = sub.dims_usize();
    let [layers, heads, m, m2] = dims[..] else {
        return Err(Error::AlignmentMismatch(format!(
            "attention dump must have 4 dims, got {:?}",
            sub.dims
        )));
    };
    if m != m2 {
        return Err(Error::AlignmentMismatch(format!("attention is {m}×{m2}, not square")));
    }
    align.validate(m)?;
    let n = align.num_words();
    let mut data = Vec::with_capacity(layers * heads * n * n);
    for lh in 0..layers * heads {
        let mat = &sub.data[lh * m * m..(lh + 1) * m * m];
        for &[rs, re] in &align.words {
            let mut row = vec![0f64; n];
            for s in rs..re {
                let src = &mat[s * m..(s + 1) * m];
                for (v, &[cs, ce]) in align.words.iter().enumerate() {
                    row[v] += src[cs..ce].iter().map(|&x| x as f64).sum::<f64>();
                }
            }
            let count = (re - rs) as f64;
            let total: f64 = row.iter().sum::<f64>() / count;
            let scale = if renormalize_rows && total > 0.0 {
                1.0 / (count * total)
            } else {
                1.0 / count
            };
            data.extend(row.into_iter().map(|x| (x * scale) as f32));
        }
    }
    AttentionTensor::new(layers, heads, n, data)
}

/// Converts subword hidden states `[L+1, m, d]` to word level by averaging
/// each word's subword vectors. Special positions are dropped.
pub fn word_level_states(sub: &TensorBlob, align: &SubwordAlignment) -> Result<HiddenStates> {
    let dims = sub.dims_usize();
    let [layers, m, d] = dims[..] else {
        return Err(Error::AlignmentMismatch(format!(
            "hidden dump must have 3 dims, got {:?}",
            sub.dims
        )));
    };
    align.validate(m)?;
    let n = align.num_words();
    let mut data = Vec::with_capacity(layers * n * d);
    for l in 0..layers {
        let layer = &sub.data[l * m * d..(l + 1) * m * d];
        for &[s, e] in &align.words {
            let mut acc = vec![0f64; d];
            for t in s..e {
                for (a, &x) in acc.iter_mut().zip(&layer[t * d..(t + 1) * d]) {
                    *a += x as f64;
                }
            }
            let count = (e - s) as f64;
            data.extend(acc.into_iter().map(|a| (a / count) as f32));
        }
    }
    HiddenStates::new(layers, n, d, data)
}
