//! Unsupervised tree induction from adjacent-word syntactic distances, plus
//! pair-set scoring against AST gold trees.

mod distance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::corpus::PairMode;
use crate::corpus::LabeledPairSet;
use crate::{Error, Result};
pub use distance::{
    distribution_distance, inject_bias, syntactic_distances, vector_distance, BiasVariant,
    DistanceFn, DistanceSource, HeadSelector,
};

/// Unlabeled `(left, right)` word-index pairs.
pub type PairSet = BTreeSet<(usize, usize)>;

/// Full binary tree over word indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinaryTree {
    Leaf(usize),
    Node(Box<BinaryTree>, Box<BinaryTree>),
}

impl BinaryTree {
    pub fn node(left: BinaryTree, right: BinaryTree) -> Self {
        BinaryTree::Node(Box::new(left), Box::new(right))
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            BinaryTree::Leaf(w) => out.push(*w),
            BinaryTree::Node(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 1,
            BinaryTree::Node(l, r) => l.num_leaves() + r.num_leaves(),
        }
    }

    pub fn num_internal(&self) -> usize {
        self.num_leaves() - 1
    }

    pub fn leftmost(&self) -> usize {
        let mut cur = self;
        loop {
            match cur {
                BinaryTree::Leaf(w) => return *w,
                BinaryTree::Node(l, _) => cur = l,
            }
        }
    }

    /// `((0 1) 2)`-style rendering with leaf indices.
    pub fn to_sexpr(&self) -> String {
        self.to_sexpr_with(|w| w.to_string())
    }

    /// Like [`to_sexpr`](Self::to_sexpr) with a custom leaf label.
    pub fn to_sexpr_with(&self, mut label: impl FnMut(usize) -> String) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out, &mut label);
        out
    }

    fn write_sexpr(&self, out: &mut String, label: &mut impl FnMut(usize) -> String) {
        match self {
            BinaryTree::Leaf(w) => out.push_str(&label(*w)),
            BinaryTree::Node(l, r) => {
                out.push('(');
                l.write_sexpr(out, label);
                out.push(' ');
                r.write_sexpr(out, label);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for BinaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

/// Greedy top-down construction: split `words` after the position of the
/// largest distance (leftmost on ties) and recurse on both halves.
/// `distances[k]` separates `words[k]` and `words[k + 1]`.
pub fn build_tree(words: &[usize], distances: &[f64]) -> Result<BinaryTree> {
    if words.is_empty() {
        return Err(Error::InvalidArgument("cannot build a tree over zero words".into()));
    }
    if distances.len() + 1 != words.len() {
        return Err(Error::LengthMismatch {
            words: words.len(),
            expected: words.len() - 1,
            actual: distances.len(),
        });
    }
    Ok(split_by(words, &mut |lo, hi| {
        let mut best = lo;
        for k in lo + 1..hi {
            if distances[k] > distances[best] {
                best = k;
            }
        }
        best
    }))
}

/// Recursive splitter shared by [`build_tree`] and the baselines. `choose`
/// receives the half-open gap range of the current span and returns the gap
/// to split at, i.e. the left part ends with `words[gap - lo_offset]`.
fn split_by(words: &[usize], choose: &mut impl FnMut(usize, usize) -> usize) -> BinaryTree {
    fn go(
        words: &[usize],
        lo: usize,
        hi: usize,
        choose: &mut impl FnMut(usize, usize) -> usize,
    ) -> BinaryTree {
        // Span covers words[lo..=hi]; gaps lo..hi.
        if lo == hi {
            return BinaryTree::Leaf(words[lo]);
        }
        let k = choose(lo, hi);
        debug_assert!((lo..hi).contains(&k));
        BinaryTree::node(go(words, lo, k, choose), go(words, k + 1, hi, choose))
    }
    go(words, 0, words.len() - 1, choose)
}

/// Structural baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    /// Split at a uniformly drawn gap at every level.
    Random(u64),
    /// Split at gap `⌈m/2⌉` of `m`.
    Balanced,
    /// Always split before the last word.
    LeftBranching,
    /// Always split after the first word.
    RightBranching,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Random(_) => "random",
            Baseline::Balanced => "balanced",
            Baseline::LeftBranching => "left-branching",
            Baseline::RightBranching => "right-branching",
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    /// Parses a baseline name; `random` gets seed 0.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Baseline::Random(0)),
            "balanced" => Ok(Baseline::Balanced),
            "left" | "left-branching" => Ok(Baseline::LeftBranching),
            "right" | "right-branching" => Ok(Baseline::RightBranching),
            _ => Err(Error::InvalidArgument(format!("unknown baseline `{s}`"))),
        }
    }
}

/// Baseline tree over words `0..n`.
pub fn baseline_tree(n: usize, kind: Baseline) -> Result<BinaryTree> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot build a tree over zero words".into()));
    }
    let words: Vec<usize> = (0..n).collect();
    Ok(match kind {
        Baseline::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            split_by(&words, &mut |lo, hi| rng.gen_range(lo..hi))
        }
        Baseline::Balanced => split_by(&words, &mut |lo, hi| lo + (hi - lo).div_ceil(2) - 1),
        Baseline::LeftBranching => split_by(&words, &mut |_, hi| hi - 1),
        Baseline::RightBranching => split_by(&words, &mut |lo, _| lo),
    })
}

/// One pair per internal node: leftmost leaf of the left child with the
/// leftmost (or a seeded random) leaf of the right child.
pub fn tree_to_pairs(tree: &BinaryTree, mode: PairMode) -> PairSet {
    let mut rng = match mode {
        PairMode::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        PairMode::Leftmost => None,
    };
    let mut out = PairSet::new();
    let mut stack = vec![tree];
    while let Some(t) = stack.pop() {
        if let BinaryTree::Node(l, r) = t {
            let right = match rng.as_mut() {
                Some(rng) => {
                    let leaves = r.leaves();
                    leaves[rng.gen_range(0..leaves.len())]
                }
                None => r.leftmost(),
            };
            out.insert((l.leftmost(), right));
            // Right pushed first so the left subtree is visited first (pre-order).
            stack.push(r);
            stack.push(l);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of `predicted` against `gold`. Two empty sets
/// score 1; a zero denominator otherwise scores 0.
pub fn f1(gold: &PairSet, predicted: &PairSet) -> Scores {
    if gold.is_empty() && predicted.is_empty() {
        return Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let hits = gold.intersection(predicted).count() as f64;
    let ratio = |den: usize| if den == 0 { 0.0 } else { hits / den as f64 };
    let precision = ratio(predicted.len());
    let recall = ratio(gold.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

/// Matched and total gold pairs for one label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCount {
    pub matched: usize,
    pub total: usize,
}

impl LabelCount {
    pub fn recall(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

/// Per-label counts of gold pairs recovered by `predicted`.
pub fn per_label_counts(gold: &LabeledPairSet, predicted: &PairSet) -> BTreeMap<String, LabelCount> {
    let mut out: BTreeMap<String, LabelCount> = BTreeMap::new();
    for p in &gold.pairs {
        let c = out.entry(p.label.clone()).or_default();
        c.total += 1;
        if predicted.contains(&(p.left, p.right)) {
            c.matched += 1;
        }
    }
    out
}

/// Per-label recall of gold pairs within a single snippet.
pub fn per_label_scores(gold: &LabeledPairSet, predicted: &PairSet) -> BTreeMap<String, f64> {
    per_label_counts(gold, predicted)
        .into_iter()
        .filter_map(|(label, c)| c.recall().map(|r| (label, r)))
        .collect()
}
