//! Attention analysis: how often high-confidence attention connects tokens
//! that share an AST parent, and how much a head's attention varies across
//! inputs at fixed positions.

mod heatmap;

use rayon::prelude::*;
use serde::Serialize;

pub use heatmap::{alignment_grid_svg, attention_heatmap, HeatmapMode};

use crate::corpus::ParentRelationMatrix;
use crate::tensorio::AttentionTensor;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f32 = 0.3;
pub const DEFAULT_MIN_COUNT: u64 = 100;
pub const DEFAULT_PREFIX_LEN: usize = 10;

/// Borrowed row-major `n × n` attention matrix of one head on one snippet.
#[derive(Debug, Clone, Copy)]
pub struct AttentionMatrix<'a> {
    pub n: usize,
    pub weights: &'a [f32],
}

impl<'a> AttentionMatrix<'a> {
    pub fn new(n: usize, weights: &'a [f32]) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: weights.len(),
            });
        }
        Ok(AttentionMatrix { n, weights })
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.weights[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentOptions {
    /// Weights strictly above this count as high-confidence.
    pub threshold: f32,
    /// Count self-attention entries; off by default since a token is never
    /// its own sibling pair.
    pub include_diagonal: bool,
    /// Heads with fewer high-confidence weights are reported as null.
    pub min_count: u64,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        AlignmentOptions {
            threshold: DEFAULT_THRESHOLD,
            include_diagonal: false,
            min_count: DEFAULT_MIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlignmentCounts {
    /// Ordered pairs with attention above the threshold.
    pub high_conf: u64,
    /// High-confidence pairs that are also in a parent relation.
    pub aligned: u64,
}

impl AlignmentCounts {
    pub fn proportion(&self) -> Option<f64> {
        (self.high_conf > 0).then(|| self.aligned as f64 / self.high_conf as f64)
    }
}

impl std::ops::Add for AlignmentCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        AlignmentCounts {
            high_conf: self.high_conf + rhs.high_conf,
            aligned: self.aligned + rhs.aligned,
        }
    }
}

/// Counts high-confidence and aligned ordered pairs on one snippet.
pub fn alignment_counts(
    attn: AttentionMatrix<'_>,
    rel: &ParentRelationMatrix,
    opts: &AlignmentOptions,
) -> Result<AlignmentCounts> {
    if rel.n() != attn.n {
        return Err(Error::DimensionMismatch {
            expected: attn.n,
            actual: rel.n(),
        });
    }
    let mut counts = AlignmentCounts::default();
    for i in 0..attn.n {
        let row = &attn.weights[i * attn.n..(i + 1) * attn.n];
        for (j, &w) in row.iter().enumerate() {
            if (i == j && !opts.include_diagonal) || w <= opts.threshold {
                continue;
            }
            counts.high_conf += 1;
            if rel.get(i, j) {
                counts.aligned += 1;
            }
        }
    }
    Ok(counts)
}

/// Corpus-level proportion of high-confidence attention weights that fall on
/// parent-related token pairs. Counts are pooled across snippets before
/// dividing. Returns the number of high-confidence weights and the
/// proportion, which is `None` when there are none.
pub fn alignment_score<'a, I>(items: I, opts: &AlignmentOptions) -> Result<(u64, Option<f64>)>
where
    I: IntoIterator<Item = (AttentionMatrix<'a>, &'a ParentRelationMatrix)>,
{
    let mut total = AlignmentCounts::default();
    let mut seen = 0usize;
    for (attn, rel) in items {
        total = total + alignment_counts(attn, rel, opts)?;
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((total.high_conf, total.proportion()))
}

/// Attention of one snippet together with its gold parent relation.
#[derive(Debug, Clone)]
pub struct SnippetAttention {
    pub id: String,
    pub attention: AttentionTensor,
    pub relation: ParentRelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadAlignment {
    pub layer: usize,
    pub head: usize,
    pub num_high_conf: u64,
    pub p_align: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentTable {
    pub layers: usize,
    pub heads: usize,
    pub cells: Vec<HeadAlignment>,
}

impl AlignmentTable {
    pub fn get(&self, layer: usize, head: usize) -> &HeadAlignment {
        &self.cells[layer * self.heads + head]
    }

    /// Largest non-null proportion in a layer.
    pub fn layer_max(&self, layer: usize) -> Option<f64> {
        (0..self.heads)
            .filter_map(|h| self.get(layer, h).p_align)
            .fold(None, |acc, p| Some(acc.map_or(p, |a: f64| a.max(p))))
    }

    /// Best non-null head; ties go to the earliest (layer, head).
    pub fn best(&self) -> Option<&HeadAlignment> {
        self.cells
            .iter()
            .filter(|c| c.p_align.is_some())
            .fold(None, |best: Option<&HeadAlignment>, c| match best {
                Some(b) if b.p_align >= c.p_align => Some(b),
                _ => Some(c),
            })
    }
}

fn check_shapes(snippets: &[SnippetAttention]) -> Result<(usize, usize)> {
    let first = snippets.first().ok_or(Error::EmptyCorpus)?;
    let (layers, heads) = (first.attention.layers(), first.attention.heads());
    for s in snippets {
        if s.attention.layers() != layers || s.attention.heads() != heads {
            return Err(Error::InvalidArgument(format!(
                "snippet {} has {}×{} heads, corpus has {layers}×{heads}",
                s.id,
                s.attention.layers(),
                s.attention.heads()
            )));
        }
    }
    Ok((layers, heads))
}

/// Alignment proportion for every (layer, head) over a corpus.
pub fn alignment_sweep(snippets: &[SnippetAttention], opts: &AlignmentOptions) -> Result<AlignmentTable> {
    let (layers, heads) = check_shapes(snippets)?;
    let per_snippet: Vec<Vec<AlignmentCounts>> = snippets
        .par_iter()
        .map(|s| {
            let n = s.attention.n();
            (0..layers * heads)
                .map(|lh| {
                    let m = AttentionMatrix::new(n, s.attention.matrix(lh / heads, lh % heads))?;
                    alignment_counts(m, &s.relation, opts)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![AlignmentCounts::default(); layers * heads];
    for counts in &per_snippet {
        for (t, &c) in totals.iter_mut().zip(counts) {
            *t = *t + c;
        }
    }
    let cells = totals
        .into_iter()
        .enumerate()
        .map(|(lh, c)| HeadAlignment {
            layer: lh / heads,
            head: lh % heads,
            num_high_conf: c.high_conf,
            p_align: if c.high_conf >= opts.min_count {
                c.proportion()
            } else {
                None
            },
        })
        .collect();
    Ok(AlignmentTable {
        layers,
        heads,
        cells,
    })
}

/// Variability of one head's attention across inputs.
///
/// Only matrices with at least `prefix_len` words take part. Rows
/// `0..prefix_len` and columns `0..c` are compared, where `c` is the smallest
/// word count among the included matrices. The result is
/// `Σ|α - mean(α)| / (2 Σ α)`, which lies in `[0, 1]`.
pub fn variability(matrices: &[AttentionMatrix<'_>], prefix_len: usize) -> Result<f64> {
    let included: Vec<_> = matrices.iter().filter(|m| m.n >= prefix_len).copied().collect();
    variability_of_included(&included, prefix_len)
}

fn variability_of_included(included: &[AttentionMatrix<'_>], rows: usize) -> Result<f64> {
    if included.is_empty() || rows == 0 {
        return Err(Error::InsufficientData(format!(
            "no snippet has at least {rows} words"
        )));
    }
    let cols = included.iter().map(|m| m.n).min().unwrap();
    let mut mean = vec![0f64; rows * cols];
    for m in included {
        for i in 0..rows {
            for j in 0..cols {
                mean[i * cols + j] += m.get(i, j) as f64;
            }
        }
    }
    let count = included.len() as f64;
    mean.iter_mut().for_each(|x| *x /= count);

    let (mut deviation, mut mass) = (0f64, 0f64);
    for m in included {
        for i in 0..rows {
            for j in 0..cols {
                let a = m.get(i, j) as f64;
                deviation += (a - mean[i * cols + j]).abs();
                mass += a;
            }
        }
    }
    if mass <= 0.0 {
        return Err(Error::InsufficientData("attention prefix has zero mass".into()));
    }
    Ok((deviation / (2.0 * mass)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariabilityTable {
    pub layers: usize,
    pub heads: usize,
    /// Number of snippets long enough to be included.
    pub included: usize,
    pub values: Vec<Option<f64>>,
}

impl VariabilityTable {
    pub fn get(&self, layer: usize, head: usize) -> Option<f64> {
        self.values[layer * self.heads + head]
    }
}

/// Variability of every head, computed over one shared inclusion list.
/// Heads whose prefix carries no attention mass are reported as `None`.
pub fn variability_sweep(snippets: &[SnippetAttention], prefix_len: usize) -> Result<VariabilityTable> {
    let (layers, heads) = check_shapes(snippets)?;
    let included: Vec<&SnippetAttention> = snippets
        .iter()
        .filter(|s| s.attention.n() >= prefix_len)
        .collect();
    if included.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no snippet has at least {prefix_len} words"
        )));
    }
    let values = (0..layers * heads)
        .into_par_iter()
        .map(|lh| {
            let mats: Vec<_> = included
                .iter()
                .map(|s| AttentionMatrix {
                    n: s.attention.n(),
                    weights: s.attention.matrix(lh / heads, lh % heads),
                })
                .collect();
            match variability_of_included(&mats, prefix_len) {
                Ok(v) => Ok(Some(v)),
                Err(Error::InsufficientData(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariabilityTable {
        layers,
        heads,
        included: included.len(),
        values,
    })
}
