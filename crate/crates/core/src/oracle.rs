//! Top-down proof enumeration, used as a reference for the compiler.
//!
//! Each proof of a query is a sequence of resolution steps ending in
//! facts; its weight is the product of those facts' weights. An answer's
//! weight is the sum over its proofs. This is exponential in general and
//! only meant for small knowledge graphs.

use std::collections::HashMap;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::lang::{Literal, Term};
use crate::program::Program;

/// Weighted answers keyed by the values of the query's variables, in
/// order of first appearance. Ground queries use the empty key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnswerTable {
    pub vars: Vec<String>,
    pub answers: IndexMap<Vec<String>, f64>,
}

impl AnswerTable {
    /// Weight of one answer; zero when it has no proof.
    pub fn weight(&self, values: &[&str]) -> f64 {
        let key: Vec<String> = values.iter().map(|s| s.to_string()).collect();
        self.answers.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.answers.values().sum()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

/// Limits for [`prove`].
#[derive(Clone, Copy, Debug)]
pub struct ProofLimits {
    /// Depth bound on rule calls; `None` uses the program's call height.
    pub max_depth: Option<usize>,
    /// Maximum number of resolution steps.
    pub budget: usize,
}

impl Default for ProofLimits {
    fn default() -> Self {
        ProofLimits {
            max_depth: None,
            budget: 10_000_000,
        }
    }
}

type Subst = HashMap<String, Term>;

struct Prover<'a> {
    program: &'a Program,
    max_depth: usize,
    budget: usize,
    steps: usize,
    fresh: usize,
    vars: Vec<String>,
    table: IndexMap<Vec<String>, f64>,
}

/// Enumerates every proof of `query` and sums their weights per answer.
///
/// A goal on a rule predicate at depth `max_depth` or deeper fails, which
/// matches the compiled functions returning zeros past the bound.
pub fn prove(program: &Program, query: &Literal, limits: ProofLimits) -> Result<AnswerTable> {
    let max_depth = match limits.max_depth.or_else(|| program.default_depth()) {
        Some(0) => return Err(Error::Config("max depth must be at least 1".into())),
        Some(d) => d,
        None => {
            return Err(Error::Config(
                "the theory is recursive; give an explicit max depth".into(),
            ))
        }
    };
    let mut vars: Vec<String> = Vec::new();
    for v in query.vars() {
        if !vars.iter().any(|w| w == v) {
            vars.push(v.to_string());
        }
    }
    let mut prover = Prover {
        program,
        max_depth,
        budget: limits.budget,
        steps: 0,
        fresh: 0,
        vars: vars.clone(),
        table: IndexMap::new(),
    };
    prover.solve(&[(query.clone(), 0)], &Subst::new(), 1.0)?;
    Ok(AnswerTable {
        vars,
        answers: prover.table,
    })
}

/// Normalizes an answer table to a probability distribution.
pub fn answer_distribution(table: &AnswerTable) -> Result<IndexMap<Vec<String>, f64>> {
    let total = table.total();
    if !(total > 0.0) {
        return Err(Error::UndefinedDistribution);
    }
    Ok(table
        .answers
        .iter()
        .map(|(k, w)| (k.clone(), w / total))
        .collect())
}

fn walk<'t>(t: &'t Term, s: &'t Subst) -> &'t Term {
    let mut t = t;
    while let Term::Var(v) = t {
        match s.get(v) {
            Some(next) => t = next,
            None => break,
        }
    }
    t
}

impl Prover<'_> {
    fn step(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::ProofBudget(self.budget));
        }
        Ok(())
    }

    fn solve(&mut self, goals: &[(Literal, usize)], s: &Subst, weight: f64) -> Result<()> {
        let Some(((goal, depth), rest)) = goals.split_first() else {
            let mut key = Vec::with_capacity(self.vars.len());
            for v in &self.vars {
                match walk(&Term::Var(v.clone()), s) {
                    Term::Const(c) => key.push(c.clone()),
                    Term::Var(_) => return Err(Error::UnboundSolution(v.clone())),
                }
            }
            *self.table.entry(key).or_insert(0.0) += weight;
            return Ok(());
        };
        self.step()?;
        let args: Vec<Term> = goal.args.iter().map(|t| walk(t, s).clone()).collect();
        let pred = goal.predicate.as_str();
        let is_rule = self.program.is_rule_predicate(pred);
        let kg = self.program.kg();
        let rel_id = kg.relation_id(pred);
        if !is_rule && rel_id.is_none() {
            return Err(Error::UndefinedPredicate(pred.to_string()));
        }
        if is_rule && *depth >= self.max_depth {
            return Ok(());
        }

        if let Some(id) = rel_id {
            let rel = kg.relation(id);
            let sig = rel.signature();
            let symbols = kg.symbols();
            let bound = |pos: usize| match &args[pos] {
                Term::Const(c) => Some(symbols.lookup(c, sig.arg(pos))),
                Term::Var(_) => None,
            };
            let second = if rel.is_unary() { None } else { bound(1) };
            let candidates: Vec<usize> = match (bound(0), second) {
                (Some(None), _) | (_, Some(None)) => Vec::new(),
                (Some(Some(r)), _) => rel.row_facts(r).to_vec(),
                (None, Some(Some(c))) => rel.col_facts(c).to_vec(),
                (None, None) => (0..rel.len()).collect(),
            };
            for k in candidates {
                let mut s2 = s.clone();
                let mut ok = true;
                for (pos, arg) in args.iter().enumerate() {
                    let id = if pos == 0 { rel.rows()[k] } else { rel.cols()[k] };
                    let name = symbols.name(sig.arg(pos), id).expect("interned");
                    match arg {
                        Term::Const(c) => ok &= c == name,
                        Term::Var(v) => {
                            // A variable repeated in the goal must agree.
                            match walk(&Term::Var(v.clone()), &s2).clone() {
                                Term::Const(c) => ok &= c == name,
                                Term::Var(u) => {
                                    s2.insert(u, Term::Const(name.to_string()));
                                }
                            }
                        }
                    }
                }
                if ok {
                    self.solve(rest, &s2, weight * rel.weights()[k])?;
                }
            }
        }

        if is_rule {
            let clauses = self.program.rule_indices(pred).to_vec();
            for ci in clauses {
                self.fresh += 1;
                let suffix = format!("#{}", self.fresh);
                let clause = self.program.clause(ci);
                let rename = |lit: &Literal| Literal {
                    predicate: lit.predicate.clone(),
                    args: lit
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) => Term::Var(format!("{v}{suffix}")),
                            c => c.clone(),
                        })
                        .collect(),
                };
                let head = rename(&clause.head);
                let mut s2 = s.clone();
                let mut ok = true;
                for (h, g) in head.args.iter().zip(&args) {
                    match walk(h, &s2).clone() {
                        Term::Var(hv) => {
                            if *g != Term::Var(hv.clone()) {
                                s2.insert(hv, g.clone());
                            }
                        }
                        Term::Const(hc) => match walk(g, &s2).clone() {
                            Term::Const(gc) => ok &= hc == gc,
                            Term::Var(gv) => {
                                s2.insert(gv, Term::Const(hc));
                            }
                        },
                    }
                }
                if !ok {
                    continue;
                }
                let mut next: Vec<(Literal, usize)> =
                    clause.body.iter().map(|l| (rename(l), depth + 1)).collect();
                next.extend(rest.iter().cloned());
                self.solve(&next, &s2, weight)?;
            }
        }
        Ok(())
    }
}
