//! Source-level rewrites that keep theories constant-free.

use std::collections::HashSet;

use crate::error::{Error, Result};

use super::ast::{Clause, Literal, Term, Theory};

/// Predicate holding the learned rule weights.
pub const RULE_WEIGHT_PREDICATE: &str = "weighted";

/// A fact produced by a rewrite, to be added to the knowledge graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthFact {
    pub predicate: String,
    pub args: Vec<String>,
    pub weight: f64,
    pub trainable: bool,
}

pub fn assign_predicate(constant: &str) -> String {
    format!("assign_{constant}")
}

fn fresh_var(base: &str, taken: &mut HashSet<String>) -> String {
    let mut stem: String = match base.chars().next() {
        Some(c) if c.is_alphabetic() => c.to_uppercase().collect(),
        _ => "V".into(),
    };
    if stem.is_empty() {
        stem = "V".into();
    }
    let mut candidate = stem.clone();
    let mut n = 1;
    while taken.contains(&candidate) {
        candidate = format!("{stem}{n}");
        n += 1;
    }
    taken.insert(candidate.clone());
    candidate
}

/// Replaces every constant `c` by a fresh variable `V` bound through a
/// prepended `assign_c(V)` literal, and returns the unit-weight facts
/// `assign_c(c)` that make the rewrite semantics-preserving.
pub fn rewrite_constants(clause: &Clause) -> (Clause, Vec<SynthFact>) {
    if !clause.has_constants() {
        return (clause.clone(), Vec::new());
    }
    let mut taken: HashSet<String> = clause.variables().into_iter().collect();
    let mut prefix = Vec::new();
    let mut facts: Vec<SynthFact> = Vec::new();
    let mut replace = |lit: &Literal| -> Literal {
        let args = lit
            .args
            .iter()
            .map(|t| match t {
                Term::Var(_) => t.clone(),
                Term::Const(c) => {
                    let v = fresh_var(c, &mut taken);
                    let pred = assign_predicate(c);
                    prefix.push(Literal {
                        predicate: pred.clone(),
                        args: vec![Term::Var(v.clone())],
                    });
                    if !facts.iter().any(|f| f.predicate == pred) {
                        facts.push(SynthFact {
                            predicate: pred,
                            args: vec![c.clone()],
                            weight: 1.0,
                            trainable: false,
                        });
                    }
                    Term::Var(v)
                }
            })
            .collect();
        Literal {
            predicate: lit.predicate.clone(),
            args,
        }
    };
    let head = replace(&clause.head);
    let body: Vec<Literal> = clause.body.iter().map(&mut replace).collect();
    let mut new_body = prefix;
    new_body.extend(body);
    (
        Clause {
            head,
            body: new_body,
            rule_id: clause.rule_id.clone(),
        },
        facts,
    )
}

/// Prefixes the body with `assign_<id>(R), weighted(R)` and returns the
/// facts `assign_<id>(id)` (fixed) and `weighted(id)` (trainable, 1.0).
pub fn attach_rule_weight(clause: &Clause, rule_id: &str) -> (Clause, Vec<SynthFact>) {
    let mut taken: HashSet<String> = clause.variables().into_iter().collect();
    let var = if taken.contains("RuleId") {
        fresh_var("rule", &mut taken)
    } else {
        "RuleId".to_string()
    };
    let assign = assign_predicate(rule_id);
    let mut body = vec![
        Literal {
            predicate: assign.clone(),
            args: vec![Term::Var(var.clone())],
        },
        Literal {
            predicate: RULE_WEIGHT_PREDICATE.to_string(),
            args: vec![Term::Var(var)],
        },
    ];
    body.extend(clause.body.iter().cloned());
    let facts = vec![
        SynthFact {
            predicate: assign,
            args: vec![rule_id.to_string()],
            weight: 1.0,
            trainable: false,
        },
        SynthFact {
            predicate: RULE_WEIGHT_PREDICATE.to_string(),
            args: vec![rule_id.to_string()],
            weight: 1.0,
            trainable: true,
        },
    ];
    (
        Clause {
            head: clause.head.clone(),
            body,
            rule_id: None,
        },
        facts,
    )
}

/// Applies rule weights then constant elimination to every clause and
/// validates the result. Synthesized facts are deduplicated.
pub fn normalize_theory(theory: &Theory) -> Result<(Theory, Vec<SynthFact>)> {
    let mut ids = HashSet::new();
    let mut clauses = Vec::with_capacity(theory.clauses.len());
    let mut facts: Vec<SynthFact> = Vec::new();
    for clause in &theory.clauses {
        let mut current = clause.clone();
        let mut produced = Vec::new();
        if let Some(id) = &clause.rule_id {
            if !ids.insert(id.clone()) {
                return Err(Error::DuplicateRuleId(id.clone()));
            }
            let (c, f) = attach_rule_weight(&current, id);
            current = c;
            produced.extend(f);
        }
        let (c, f) = rewrite_constants(&current);
        produced.extend(f);
        c.validate()?;
        for fact in produced {
            if !facts
                .iter()
                .any(|g| g.predicate == fact.predicate && g.args == fact.args)
            {
                facts.push(fact);
            }
        }
        clauses.push(c);
    }
    Ok((Theory { clauses }, facts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_rules;

    fn clause(text: &str) -> Clause {
        parse_rules(text).unwrap().clauses.remove(0)
    }

    #[test]
    fn head_constant_becomes_assign_literal() {
        let (c, facts) = rewrite_constants(&clause("status(X,tired):-child(W,X),infant(W)."));
        assert_eq!(
            c.to_string(),
            "status(X,T) :- assign_tired(T), child(W,X), infant(W)."
        );
        assert_eq!(facts.len(), 1);
        assert_eq!(facts[0].predicate, "assign_tired");
        assert_eq!(facts[0].args, vec!["tired".to_string()]);
        assert_eq!(facts[0].weight, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn constant_free_clause_is_unchanged() {
        let original = clause("uncle(X,Y):-child(X,W),brother(W,Y).");
        let (c, facts) = rewrite_constants(&original);
        assert_eq!(c, original);
        assert!(facts.is_empty());
    }

    #[test]
    fn repeated_constant_gets_two_variables_one_predicate() {
        let (c, facts) = rewrite_constants(&clause("p(X,Y) :- q(X,bob), r(bob,Y)."));
        assert_eq!(
            c.to_string(),
            "p(X,Y) :- assign_bob(B), assign_bob(B1), q(X,B), r(B1,Y)."
        );
        assert_eq!(facts.len(), 1);
    }

    #[test]
    fn fresh_names_avoid_clashes() {
        let (c, _) = rewrite_constants(&clause("p(T,Y) :- q(T,Y), r(Y,tired)."));
        assert_eq!(c.to_string(), "p(T,Y) :- assign_tired(T1), q(T,Y), r(Y,T1).");
    }

    #[test]
    fn rule_weight_prefix() {
        let (c, facts) = attach_rule_weight(&clause("status(X,tired):-child(W,X),infant(W)."), "c3");
        assert_eq!(
            c.to_string(),
            "status(X,tired) :- assign_c3(RuleId), weighted(RuleId), child(W,X), infant(W)."
        );
        assert_eq!(facts[1].predicate, "weighted");
        assert!(facts[1].trainable);
    }

    #[test]
    fn duplicate_rule_ids_are_rejected() {
        let t = parse_rules("p(X,Y) :- q(X,Y) {r1}.\np(X,Y) :- s(X,Y) {r1}.").unwrap();
        assert!(matches!(normalize_theory(&t), Err(Error::DuplicateRuleId(_))));
    }

    #[test]
    fn unweighted_theory_has_no_weighted_facts() {
        let t = parse_rules("uncle(X,Y):-child(X,W),brother(W,Y).").unwrap();
        let (_, facts) = normalize_theory(&t).unwrap();
        assert!(facts.is_empty());
    }
}
