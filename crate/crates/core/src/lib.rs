//! Structural analysis of pre-trained code models.
//!
//! The crate consumes attention weights and hidden states dumped from a
//! transformer code model (see [`tensorio`]) together with concrete syntax
//! trees of the same snippets (see [`corpus`]) and measures how much of the
//! tree structure the model captures:
//!
//! - [`attnlens`]: how often high-confidence attention connects tokens that
//!   share an AST parent, and how position- or content-driven each head is.
//! - [`probe`]: a linear structural probe whose squared distances are trained
//!   to match leaf-to-leaf tree distances, scored by Spearman correlation.
//! - [`induce`]: greedy top-down binary tree induction from adjacent-token
//!   syntactic distances, scored by pair-set F1 against the gold AST.
//!
//! [`synth`] builds planted instances with known answers for every analysis.

pub mod attnlens;
pub mod corpus;
mod error;
pub mod induce;
pub mod probe;
pub mod stats;
pub mod synth;
pub mod tensorio;

pub use error::{Error, Result};
