use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::SyntaxTree;

/// `rel[i][j]` is set when leaves `i` and `j` share an AST parent and are not
/// textually adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentRelationMatrix {
    n: usize,
    rel: Vec<bool>,
}

impl ParentRelationMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut rel = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                rel[i * n + j] = f(i, j);
            }
        }
        ParentRelationMatrix { n, rel }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rel[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rel[i * self.n..(i + 1) * self.n]
    }

    /// Restriction to the first `n` words.
    pub fn prefix(&self, n: usize) -> Self {
        Self::from_fn(n.min(self.n), |i, j| self.get(i, j))
    }
}

pub fn parent_relation(tree: &SyntaxTree) -> ParentRelationMatrix {
    let parents: Vec<_> = tree.leaves().iter().map(|&l| tree.parent(l)).collect();
    ParentRelationMatrix::from_fn(parents.len(), |i, j| {
        i.abs_diff(j) > 1 && parents[i].is_some() && parents[i] == parents[j]
    })
}

/// Number of edges on the AST path between every pair of leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDistanceMatrix {
    n: usize,
    d: Vec<u32>,
}

impl TreeDistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> u32) -> Self {
        let mut d = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = f(i, j);
            }
        }
        TreeDistanceMatrix { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.d
    }
}

/// All-pairs leaf distances via `depth(i) + depth(j) - 2 * depth(lca)`.
pub fn tree_distances(tree: &SyntaxTree) -> TreeDistanceMatrix {
    let n = tree.num_leaves();
    // Root-to-leaf paths; the LCA depth is the length of the common prefix minus one.
    let paths: Vec<Vec<usize>> = tree
        .leaves()
        .iter()
        .map(|&leaf| {
            let mut path = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = tree.parent(cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            path
        })
        .collect();
    let mut d = vec![0u32; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let common = paths[i]
                .iter()
                .zip(&paths[j])
                .take_while(|(a, b)| a == b)
                .count();
            let dist = (paths[i].len() - common) + (paths[j].len() - common);
            d[i * n + j] = dist as u32;
            d[j * n + i] = dist as u32;
        }
    }
    TreeDistanceMatrix { n, d }
}

/// How the right-hand leaf of a pair is chosen when a subtree spans several leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairMode {
    /// Leftmost leaf of the second child.
    #[default]
    Leftmost,
    /// Uniformly drawn leaf of the non-first children, from a seeded generator.
    SeededRandom(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub left: usize,
    pub right: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledPairSet {
    pub pairs: Vec<LabeledPair>,
}

impl LabeledPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pair set without labels.
    pub fn unlabeled(&self) -> crate::induce::PairSet {
        self.pairs.iter().map(|p| (p.left, p.right)).collect()
    }
}

/// One leaf pair per internal node with at least two children: the leftmost
/// leaf of the first child paired with a leaf of the remaining children.
pub fn gold_pair_set(tree: &SyntaxTree, mode: PairMode) -> LabeledPairSet {
    let mut rng = match mode {
        PairMode::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        PairMode::Leftmost => None,
    };
    let mut pairs = Vec::new();
    for id in tree.internal_nodes() {
        let node = tree.node(id);
        if node.children.len() < 2 {
            continue;
        }
        let left = tree.leaf_range(node.children[0]).start;
        let rest_start = tree.leaf_range(node.children[1]).start;
        let rest_end = tree.leaf_range(id).end;
        let right = match rng.as_mut() {
            Some(rng) => rng.gen_range(rest_start..rest_end),
            None => rest_start,
        };
        pairs.push(LabeledPair {
            left,
            right,
            label: node.label.clone(),
        });
    }
    pairs.sort();
    LabeledPairSet { pairs }
}
