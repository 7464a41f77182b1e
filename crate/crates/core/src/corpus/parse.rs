use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tree::{NodeId, SyntaxTree, TreeBuilder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
    Php,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
            Language::Php => "php",
        }
    }

    fn grammar(self) -> tree_sitter::Language {
        match self {
            Language::Python => tree_sitter_python::LANGUAGE.into(),
            Language::Java => tree_sitter_java::LANGUAGE.into(),
            // Snippets are bare functions without an opening `<?php` tag.
            Language::Php => tree_sitter_php::LANGUAGE_PHP_ONLY.into(),
        }
    }

    /// Node kinds kept as a single word even though the grammar splits them.
    fn is_atomic(self, kind: &str) -> bool {
        match self {
            Language::Python => kind == "string",
            Language::Java => matches!(kind, "string_literal" | "character_literal" | "text_block"),
            Language::Php => matches!(
                kind,
                "string" | "encapsed_string" | "heredoc" | "nowdoc" | "variable_name"
            ),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(Language::Python),
            "java" => Ok(Language::Java),
            "php" => Ok(Language::Php),
            _ => Err(Error::UnsupportedLanguage(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordToken {
    pub text: String,
    pub span: Range<usize>,
}

/// A code snippet together with its words (the AST terminals).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSnippet {
    pub id: String,
    pub language: Language,
    pub source: String,
    pub words: Vec<WordToken>,
}

impl CodeSnippet {
    pub fn from_tree(id: impl Into<String>, language: Language, source: String, tree: &SyntaxTree) -> Self {
        let words = words_of(tree, &source);
        CodeSnippet {
            id: id.into(),
            language,
            source,
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Word tokens of `tree` as they appear in `source`.
pub fn words_of(tree: &SyntaxTree, source: &str) -> Vec<WordToken> {
    tree.leaves()
        .iter()
        .map(|&leaf| {
            let span = tree.node(leaf).span.clone();
            WordToken {
                text: source.get(span.clone()).unwrap_or_default().to_string(),
                span,
            }
        })
        .collect()
}

/// Parses `source` and rejects input containing syntax errors.
pub fn parse_snippet(source: &str, language: Language) -> Result<SyntaxTree> {
    parse(source, language, false)
}

/// Parses `source`, keeping the grammar's error-recovery nodes (labelled
/// `ERROR`). Used for truncated snippets, whose tails are rarely complete.
pub fn parse_snippet_lenient(source: &str, language: Language) -> Result<SyntaxTree> {
    parse(source, language, true)
}

fn parse(source: &str, language: Language, lenient: bool) -> Result<SyntaxTree> {
    let parse_error = |message: String| Error::Parse {
        language: language.to_string(),
        message,
    };
    let mut parser = tree_sitter::Parser::new();
    parser
        .set_language(&language.grammar())
        .map_err(|e| parse_error(e.to_string()))?;
    let ts_tree = parser
        .parse(source, None)
        .ok_or_else(|| parse_error("parser returned no tree".into()))?;
    let ts_root = ts_tree.root_node();
    if !lenient && ts_root.has_error() {
        return Err(parse_error(format!(
            "syntax error near byte {}",
            first_error_byte(ts_root).unwrap_or(0)
        )));
    }

    let mut builder = TreeBuilder::new();
    let root = convert(ts_root, language, &mut builder)
        .ok_or_else(|| parse_error("snippet contains no tokens".into()))?;
    builder.finish(root)
}

fn first_error_byte(node: tree_sitter::Node) -> Option<usize> {
    if node.is_error() || node.is_missing() {
        return Some(node.start_byte());
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_error_byte)
}

/// Copies a tree-sitter subtree into the arena. Comments and zero-width
/// (missing) tokens are dropped, as are internal nodes left without children.
fn convert(node: tree_sitter::Node, language: Language, b: &mut TreeBuilder) -> Option<NodeId> {
    let kind = node.kind();
    if kind.ends_with("comment") || node.start_byte() >= node.end_byte() {
        return None;
    }
    let span = node.start_byte()..node.end_byte();
    if node.child_count() == 0 || language.is_atomic(kind) {
        return Some(b.leaf(kind, span));
    }
    let mut cursor = node.walk();
    let children: Vec<NodeId> = node
        .children(&mut cursor)
        .filter_map(|c| convert(c, language, b))
        .collect();
    if children.is_empty() {
        None
    } else {
        Some(b.internal(kind, children))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(tree: &SyntaxTree, source: &str) -> Vec<String> {
        words_of(tree, source).into_iter().map(|w| w.text).collect()
    }

    #[test]
    fn simple_assignment() {
        let src = "x = 1";
        let tree = parse_snippet(src, Language::Python).unwrap();
        assert_eq!(labels(&tree, src), ["x", "=", "1"]);
        assert_eq!(
            tree.to_sexpr(),
            "(module (expression_statement (assignment identifier = integer)))"
        );
        let parent = tree.parent(tree.leaf(0));
        assert!((1..3).all(|i| tree.parent(tree.leaf(i)) == parent));
        assert_eq!(tree.node(parent.unwrap()).label, "assignment");
    }

    #[test]
    fn empty_source_is_rejected() {
        assert!(matches!(
            parse_snippet("", Language::Python),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn syntax_error_is_rejected_unless_lenient() {
        let src = "def f(x):\n    return a +";
        assert!(parse_snippet(src, Language::Python).is_err());
        let tree = parse_snippet_lenient(src, Language::Python).unwrap();
        assert!(tree.nodes().iter().any(|n| n.label == "ERROR"));
        assert_eq!(labels(&tree, src).last().unwrap(), "+");
    }

    #[test]
    fn if_statement_tokens() {
        let src = "if exit_code is not None:\n    sys.exit(exit_code)\n";
        let tree = parse_snippet(src, Language::Python).unwrap();
        let words = labels(&tree, src);
        assert_eq!(
            &words[..6],
            ["if", "exit_code", "is", "not", "None", ":"]
        );
        let if_node = tree.parent(tree.leaf(0)).unwrap();
        assert_eq!(tree.node(if_node).label, "if_statement");
        let cmp = tree.parent(tree.leaf(1)).unwrap();
        assert_eq!(tree.node(cmp).label, "comparison_operator");
        assert_eq!(tree.parent(tree.leaf(4)), Some(cmp));
    }

    #[test]
    fn strings_and_comments() {
        let src = "print(\"a b\")  # note\n";
        let tree = parse_snippet(src, Language::Python).unwrap();
        assert_eq!(labels(&tree, src), ["print", "(", "\"a b\"", ")"]);
    }

    #[test]
    fn java_and_php() {
        let src = "int f(String a) { return a.length() + \"x\".length(); /* c */ }";
        let tree = parse_snippet(src, Language::Java).unwrap();
        let words = labels(&tree, src);
        assert!(words.contains(&"\"x\"".to_string()));
        assert!(!words.iter().any(|w| w.contains("/*")));

        let src = "function f($a) { return $a . \"x{$a}\"; }";
        let tree = parse_snippet(src, Language::Php).unwrap();
        assert_eq!(
            labels(&tree, src),
            ["function", "f", "(", "$a", ")", "{", "return", "$a", ".", "\"x{$a}\"", ";", "}"]
        );
    }

    #[test]
    fn language_names() {
        assert_eq!("Python".parse::<Language>().unwrap(), Language::Python);
        assert!(matches!(
            "ruby".parse::<Language>(),
            Err(Error::UnsupportedLanguage(_))
        ));
    }
}
