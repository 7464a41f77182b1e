//! Code snippets, their concrete syntax trees and the gold structures derived
//! from them: parent relations, leaf-to-leaf tree distances and pair sets.

mod manifest;
mod parse;
mod relations;
mod tree;

pub use manifest::{
    load_corpus, truncate_source, Corpus, LoadOptions, LoadedSnippet, Manifest, ManifestEntry,
    TensorPaths, DEFAULT_MAX_LEN,
};
pub use parse::{parse_snippet, parse_snippet_lenient, words_of, CodeSnippet, Language, WordToken};
pub use relations::{
    gold_pair_set, parent_relation, tree_distances, LabeledPair, LabeledPairSet, PairMode,
    ParentRelationMatrix, TreeDistanceMatrix,
};
pub use tree::{NodeId, SyntaxNode, SyntaxTree, TreeBuilder};
