//! The rule language: clauses, modes, example files, and the rewrites that
//! remove constants from theories.

mod ast;
mod examples;
mod parser;
mod rewrite;

pub use ast::{is_variable_name, Clause, Direction, Literal, Mode, Term, Theory};
pub use examples::{parse_examples, Example, ExampleSet};
pub use parser::{parse_literal, parse_rules};
pub use rewrite::{
    assign_predicate, attach_rule_weight, normalize_theory, rewrite_constants, SynthFact,
    RULE_WEIGHT_PREDICATE,
};
