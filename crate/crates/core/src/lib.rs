//! Compile probabilistic deductive queries over a weighted knowledge graph
//! into differentiable sparse-matrix functions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod kgstore;
pub mod lang;
pub mod compiler;
pub mod learner;
pub mod oracle;
pub mod program;
pub mod runtime;

pub use error::{Error, Result};
pub use kgstore::{KnowledgeGraph, RelId, Relation, Signature, TypeId};
pub use lang::{parse_examples, parse_rules, Clause, Direction, Literal, Mode, Term, Theory};
pub use program::Program;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/knowledge-graph.md")]
    struct KnowledgeGraph;
    #[doc = include_str!("../../../book/src/rules.md")]
    struct Rules;
    #[doc = include_str!("../../../book/src/compiling.md")]
    struct Compiling;
    #[doc = include_str!("../../../book/src/learning.md")]
    struct Learning;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
