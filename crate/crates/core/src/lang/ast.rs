use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    /// Uppercase or underscore-initial names are variables.
    pub fn parse(name: &str) -> Term {
        if is_variable_name(name) {
            Term::Var(name.to_string())
        } else {
            Term::Const(name.to_string())
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

pub fn is_variable_name(name: &str) -> bool {
    name.chars()
        .next()
        .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(predicate: &str, args: &[&str]) -> Literal {
        Literal {
            predicate: predicate.to_string(),
            args: args.iter().map(|a| Term::parse(a)).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn has_constants(&self) -> bool {
        self.args.iter().any(|t| matches!(t, Term::Const(_)))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// A Horn clause `head :- body`. `rule_id` carries the optional `{id}`
/// annotation that requests a learned rule weight.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Literal,
    pub body: Vec<Literal>,
    pub rule_id: Option<String>,
}

impl Clause {
    pub fn new(head: Literal, body: Vec<Literal>) -> Clause {
        Clause {
            head,
            body,
            rule_id: None,
        }
    }

    /// Variables in order of first appearance, head first.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for lit in std::iter::once(&self.head).chain(&self.body) {
            for v in lit.vars() {
                if seen.insert(v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn has_constants(&self) -> bool {
        std::iter::once(&self.head)
            .chain(&self.body)
            .any(Literal::has_constants)
    }

    /// Checks the shape the compiler relies on: arity 1 or 2, no variable
    /// repeated inside one literal, no constants, distinct head variables
    /// that all occur in the body.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidClause {
            clause: self.to_string(),
            reason,
        };
        for lit in std::iter::once(&self.head).chain(&self.body) {
            match lit.arity() {
                1 | 2 => {}
                0 => return Err(fail(format!("literal {lit} has no arguments"))),
                _ => return Err(Error::Arity(lit.to_string())),
            }
            if lit.arity() == 2 && lit.args[0] == lit.args[1] {
                if let Term::Var(v) = &lit.args[0] {
                    return Err(fail(format!(
                        "variable {v} appears twice in literal {lit}"
                    )));
                }
            }
            if lit.has_constants() {
                return Err(fail(format!("literal {lit} contains a constant")));
            }
        }
        let body_vars: HashSet<&str> = self.body.iter().flat_map(Literal::vars).collect();
        for v in self.head.vars() {
            if !body_vars.contains(v) {
                return Err(fail(format!("head variable {v} does not occur in the body")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{lit}")?;
            }
        }
        if let Some(id) = &self.rule_id {
            write!(f, " {{{id}}}")?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Theory {
    pub clauses: Vec<Clause>,
}

impl Theory {
    pub fn predicates(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.clauses
            .iter()
            .map(|c| c.head.predicate.as_str())
            .filter(|p| seen.insert(*p))
            .collect()
    }

    pub fn clauses_for<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Clause> {
        self.clauses
            .iter()
            .filter(move |c| c.head.predicate == predicate)
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Argument direction of a query; `i` marks the bound position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `p(c,Y)`
    InOut,
    /// `p(Y,c)`
    OutIn,
    /// `p(c)`
    In,
    /// `p(Y)`
    Out,
}

impl Direction {
    pub fn arity(self) -> usize {
        match self {
            Direction::InOut | Direction::OutIn => 2,
            Direction::In | Direction::Out => 1,
        }
    }

    /// Argument position bound to the input, if any.
    pub fn input_position(self) -> Option<usize> {
        match self {
            Direction::InOut | Direction::In => Some(0),
            Direction::OutIn => Some(1),
            Direction::Out => None,
        }
    }

    /// Argument position that receives the answer, if any.
    pub fn output_position(self) -> Option<usize> {
        match self {
            Direction::InOut => Some(1),
            Direction::OutIn | Direction::Out => Some(0),
            Direction::In => None,
        }
    }

    /// The direction used when a literal is traversed the other way.
    pub fn reversed(self) -> Direction {
        match self {
            Direction::InOut => Direction::OutIn,
            Direction::OutIn => Direction::InOut,
            Direction::In => Direction::Out,
            Direction::Out => Direction::In,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::InOut => "io",
            Direction::OutIn => "oi",
            Direction::In => "i",
            Direction::Out => "o",
        }
    }
}

/// A predicate with an input/output direction, written `p/io`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub predicate: String,
    pub direction: Direction,
}

impl Mode {
    pub fn new(predicate: &str, direction: Direction) -> Mode {
        Mode {
            predicate: predicate.to_string(),
            direction,
        }
    }

    pub fn parse(text: &str) -> Result<Mode> {
        let (pred, dir) = text
            .rsplit_once('/')
            .ok_or_else(|| Error::BadMode(text.to_string()))?;
        let direction = match dir {
            "io" => Direction::InOut,
            "oi" => Direction::OutIn,
            "i" => Direction::In,
            "o" => Direction::Out,
            _ => return Err(Error::BadMode(text.to_string())),
        };
        if pred.is_empty() {
            return Err(Error::BadMode(text.to_string()));
        }
        Ok(Mode::new(pred, direction))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.predicate, self.direction.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        for text in ["uncle/io", "uncle/oi", "smokes/i", "sat/o"] {
            assert_eq!(Mode::parse(text).unwrap().to_string(), text);
        }
        assert!(Mode::parse("uncle").is_err());
        assert!(Mode::parse("uncle/xx").is_err());
    }

    #[test]
    fn repeated_variable_is_rejected() {
        let c = Clause::new(Literal::new("p", &["X"]), vec![Literal::new("q", &["X", "X"])]);
        assert!(matches!(c.validate(), Err(Error::InvalidClause { .. })));
    }

    #[test]
    fn head_variables_must_be_bound() {
        let c = Clause::new(
            Literal::new("p", &["X", "Y"]),
            vec![Literal::new("q", &["X", "Z"])],
        );
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("head variable Y"), "{err}");
    }
}
