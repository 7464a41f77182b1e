use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxNode {
    pub label: String,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Byte range of the node in the snippet source.
    pub span: Range<usize>,
}

impl SyntaxNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Concrete syntax tree whose leaves are the words of a snippet.
///
/// Nodes live in an arena. Leaves are numbered by word position in source
/// order; every node covers a contiguous range of word positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    nodes: Vec<SyntaxNode>,
    root: NodeId,
    leaves: Vec<NodeId>,
    leaf_ranges: Vec<Range<usize>>,
    depths: Vec<usize>,
}

impl SyntaxTree {
    /// Builds a tree from an arena of nodes. Parent links are recomputed from
    /// the child lists; the node set reachable from `root` must be a tree.
    pub fn new(mut nodes: Vec<SyntaxNode>, root: NodeId) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "root {root} outside arena of {} nodes",
                nodes.len()
            )));
        }
        for node in nodes.iter_mut() {
            node.parent = None;
        }
        let mut seen = vec![false; nodes.len()];
        let mut leaves = Vec::new();
        let mut leaf_ranges = vec![0..0; nodes.len()];
        let mut depths = vec![0; nodes.len()];

        // Iterative DFS: (node, depth, visited-children flag).
        let mut stack = vec![(root, 0usize, false)];
        seen[root] = true;
        while let Some((id, depth, expanded)) = stack.pop() {
            if expanded {
                let children = &nodes[id].children;
                let start = leaf_ranges[children[0]].start;
                let end = leaf_ranges[*children.last().unwrap()].end;
                leaf_ranges[id] = start..end;
                continue;
            }
            depths[id] = depth;
            if nodes[id].children.is_empty() {
                leaf_ranges[id] = leaves.len()..leaves.len() + 1;
                leaves.push(id);
                continue;
            }
            stack.push((id, depth, true));
            let children = nodes[id].children.clone();
            for &child in children.iter().rev() {
                if child >= nodes.len() || seen[child] {
                    return Err(Error::InvalidArgument(format!(
                        "node {child} is out of range or has more than one parent"
                    )));
                }
                seen[child] = true;
                nodes[child].parent = Some(id);
                stack.push((child, depth + 1, false));
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "node {orphan} is not reachable from the root"
            )));
        }

        Ok(SyntaxTree {
            nodes,
            root,
            leaves,
            leaf_ranges,
            depths,
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &SyntaxNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[SyntaxNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of leaves (words).
    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Node id of the leaf at word position `pos`.
    pub fn leaf(&self, pos: usize) -> NodeId {
        self.leaves[pos]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Word positions covered by `id`.
    pub fn leaf_range(&self, id: NodeId) -> Range<usize> {
        self.leaf_ranges[id].clone()
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.depths[id]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    /// Internal nodes in pre-order.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.preorder().filter(|&id| !self.nodes[id].is_leaf())
    }

    pub fn preorder(&self) -> impl Iterator<Item = NodeId> + '_ {
        let mut stack = vec![self.root];
        std::iter::from_fn(move || {
            let id = stack.pop()?;
            stack.extend(self.nodes[id].children.iter().rev());
            Some(id)
        })
    }

    /// Nodes in post-order (children before parents, left to right).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.nodes[id].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        while self.depths[a] > self.depths[b] {
            a = self.nodes[a].parent.unwrap();
        }
        while self.depths[b] > self.depths[a] {
            b = self.nodes[b].parent.unwrap();
        }
        while a != b {
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        a
    }

    /// Bracketed form with leaf labels, e.g. `(assignment identifier = integer)`.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(self.root, &mut out);
        out
    }

    fn write_sexpr(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        if node.is_leaf() {
            out.push_str(&node.label);
            return;
        }
        out.push('(');
        out.push_str(&node.label);
        for &c in &node.children {
            out.push(' ');
            self.write_sexpr(c, out);
        }
        out.push(')');
    }
}

/// Incremental arena builder used by the parser and by synthetic generators.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    nodes: Vec<SyntaxNode>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, label: impl Into<String>, span: Range<usize>) -> NodeId {
        self.push(label.into(), Vec::new(), span)
    }

    /// Adds an internal node; its span is the hull of its children's spans.
    pub fn internal(&mut self, label: impl Into<String>, children: Vec<NodeId>) -> NodeId {
        let start = children
            .iter()
            .map(|&c| self.nodes[c].span.start)
            .min()
            .unwrap_or(0);
        let end = children
            .iter()
            .map(|&c| self.nodes[c].span.end)
            .max()
            .unwrap_or(0);
        self.push(label.into(), children, start..end)
    }

    fn push(&mut self, label: String, children: Vec<NodeId>, span: Range<usize>) -> NodeId {
        self.nodes.push(SyntaxNode {
            label,
            children,
            parent: None,
            span,
        });
        self.nodes.len() - 1
    }

    pub fn finish(self, root: NodeId) -> Result<SyntaxTree> {
        SyntaxTree::new(self.nodes, root)
    }
}
