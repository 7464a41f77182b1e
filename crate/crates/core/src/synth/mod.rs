//! Synthetic instances with known answers: random binary trees, path-indicator
//! embeddings whose squared distances equal tree distances, ideal syntactic
//! distance vectors, and full on-disk corpora with scripted tensors.

mod corpus;

use crate::corpus::{tree_distances, NodeId, SyntaxTree, TreeBuilder, TreeDistanceMatrix};
use crate::induce::{baseline_tree, Baseline, BinaryTree};
use crate::{Error, Result};

pub use corpus::{generate_corpus, SynthConfig, SynthFamily, SYNTH_ATTENTION_LAYERS, SYNTH_HEADS, SYNTH_HIDDEN_LAYERS};

/// Binary tree over leaves `0..n` built from uniform random splits.
pub fn random_binary_tree(n: usize, seed: u64) -> Result<BinaryTree> {
    baseline_tree(n, Baseline::Random(seed))
}

/// Converts a binary tree to a [`SyntaxTree`] with leaves labelled `w{i}` and
/// internal nodes labelled `node`. Leaves must be `0..n` in order.
pub fn binary_to_syntax_tree(tree: &BinaryTree) -> Result<SyntaxTree> {
    fn go(t: &BinaryTree, b: &mut TreeBuilder) -> NodeId {
        match t {
            BinaryTree::Leaf(w) => b.leaf(format!("w{w}"), *w..*w + 1),
            BinaryTree::Node(l, r) => {
                let l = go(l, b);
                let r = go(r, b);
                b.internal("node", vec![l, r])
            }
        }
    }
    if tree.leaves().iter().enumerate().any(|(i, &w)| i != w) {
        return Err(Error::InvalidArgument("binary tree leaves must be 0..n in order".into()));
    }
    let mut b = TreeBuilder::new();
    let root = go(tree, &mut b);
    b.finish(root)
}

/// Number of edges in `tree`, i.e. the embedding width needed by
/// [`planted_embeddings`].
pub fn edge_count(tree: &SyntaxTree) -> usize {
    tree.len() - 1
}

/// Path-indicator embeddings: coordinate `e` of leaf `u` is 1 iff edge `e`
/// lies on the root-to-`u` path. Edges are numbered by their child node,
/// skipping the root. Rows are zero-padded to `dim` columns, which must be at
/// least [`edge_count`]. Row-major `n × dim`.
pub fn planted_embeddings(tree: &SyntaxTree, dim: usize) -> Result<Vec<f32>> {
    let edges = edge_count(tree);
    if dim < edges {
        return Err(Error::DimensionMismatch {
            expected: edges,
            actual: dim,
        });
    }
    let root = tree.root();
    let coord = |id: NodeId| if id < root { id } else { id - 1 };
    let mut out = vec![0f32; tree.num_leaves() * dim];
    for (i, &leaf) in tree.leaves().iter().enumerate() {
        let row = &mut out[i * dim..(i + 1) * dim];
        let mut cur = leaf;
        while cur != root {
            row[coord(cur)] = 1.0;
            cur = tree.parent(cur).expect("non-root node has a parent");
        }
    }
    Ok(out)
}

/// `d[i]` is the post-order index (over all nodes) of the lowest common
/// ancestor of leaves `i` and `i + 1`.
pub fn tree_ideal_distances(tree: &SyntaxTree) -> Vec<f64> {
    let mut index = vec![0usize; tree.len()];
    for (k, id) in tree.postorder().into_iter().enumerate() {
        index[id] = k;
    }
    tree.leaves()
        .windows(2)
        .map(|w| index[tree.lca(w[0], w[1])] as f64)
        .collect()
}

/// Ideal distances of a binary tree; greedy induction on them rebuilds the tree.
pub fn ideal_distances(tree: &BinaryTree) -> Result<Vec<f64>> {
    Ok(tree_ideal_distances(&binary_to_syntax_tree(tree)?))
}

/// A random binary tree with everything needed to check the analyses on it.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub binary: BinaryTree,
    pub tree: SyntaxTree,
    /// Row-major `n × dim` path-indicator embeddings.
    pub embeddings: Vec<f32>,
    pub dim: usize,
    pub distances: TreeDistanceMatrix,
    pub ideal: Vec<f64>,
}

impl PlantedInstance {
    /// Instance over `n` leaves; embeddings are padded to `dim` columns, or
    /// to the edge count when `dim` is `None`.
    pub fn generate(n: usize, seed: u64, dim: Option<usize>) -> Result<Self> {
        let binary = random_binary_tree(n, seed)?;
        let tree = binary_to_syntax_tree(&binary)?;
        let dim = dim.unwrap_or_else(|| edge_count(&tree));
        let embeddings = planted_embeddings(&tree, dim)?;
        Ok(PlantedInstance {
            distances: tree_distances(&tree),
            ideal: tree_ideal_distances(&tree),
            binary,
            tree,
            embeddings,
            dim,
        })
    }

    pub fn n(&self) -> usize {
        self.tree.num_leaves()
    }
}
