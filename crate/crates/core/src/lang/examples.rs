use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::ast::{Direction, Mode, Term};
use super::parser::parse_literal;

/// One training or evaluation query with its target answers.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// The bound constant; `None` for `p(Y)` queries.
    pub input: Option<String>,
    pub answers: Vec<(String, f64)>,
}

/// Examples sharing one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleSet {
    pub mode: Mode,
    pub examples: Vec<Example>,
}

impl ExampleSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Writes the set back in the example-file format.
    pub fn write(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            let query = match (self.mode.direction, &ex.input) {
                (Direction::InOut, Some(c)) => format!("{}({c},Y)", self.mode.predicate),
                (Direction::OutIn, Some(c)) => format!("{}(Y,{c})", self.mode.predicate),
                _ => format!("{}(Y)", self.mode.predicate),
            };
            out.push_str(&query);
            for (a, w) in &ex.answers {
                if *w == 1.0 {
                    out.push_str(&format!("\t{a}"));
                } else {
                    out.push_str(&format!("\t{a}:{w:?}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses an example file: a query literal with exactly one variable,
/// then tab-separated answers `constant[:weight]`. Lines are grouped by
/// mode in order of first appearance.
pub fn parse_examples(text: &str) -> Result<Vec<ExampleSet>> {
    let mut sets: IndexMap<Mode, Vec<Example>> = IndexMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            column: 1,
            message,
        };
        let mut fields = line.split('\t').map(str::trim);
        let query = fields.next().unwrap_or_default();
        let lit = parse_literal(query).map_err(|e| match e {
            Error::Parse { message, column, .. } => Error::Parse {
                line: line_no,
                column,
                message,
            },
            Error::Arity(l) => err(format!("unsupported arity in {l}")),
            other => other,
        })?;
        let vars = lit.vars().count();
        if vars != 1 {
            return Err(err(format!(
                "query {lit} must contain exactly one variable, found {vars}"
            )));
        }
        let (direction, input) = match lit.args.as_slice() {
            [Term::Const(c), Term::Var(_)] => (Direction::InOut, Some(c.clone())),
            [Term::Var(_), Term::Const(c)] => (Direction::OutIn, Some(c.clone())),
            [Term::Var(_)] => (Direction::Out, None),
            _ => return Err(err(format!("unsupported query shape {lit}"))),
        };
        let mut answers = Vec::new();
        for field in fields.filter(|f| !f.is_empty()) {
            let (name, weight) = match field.rsplit_once(':') {
                Some((name, w)) => (
                    name,
                    w.parse::<f64>()
                        .map_err(|_| err(format!("bad answer weight `{w}`")))?,
                ),
                None => (field, 1.0),
            };
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(err(format!("answer weight must be nonnegative, got {weight}")));
            }
            if name.is_empty() {
                return Err(err("empty answer".into()));
            }
            answers.push((name.to_string(), weight));
        }
        sets.entry(Mode::new(&lit.predicate, direction))
            .or_default()
            .push(Example { input, answers });
    }
    Ok(sets
        .into_iter()
        .map(|(mode, examples)| ExampleSet { mode, examples })
        .collect())
}
