//! A theory bound to a knowledge graph.
//!
//! Building a [`Program`] applies the rule-weight and constant-elimination
//! rewrites, infers a type for every clause variable and every
//! rule-defined predicate, and adds the synthesized facts to the graph.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::kgstore::{KnowledgeGraph, Signature, TypeId};
use crate::lang::{normalize_theory, parse_rules, Clause, Literal, Theory};

#[derive(Clone, Debug)]
pub struct Program {
    kg: KnowledgeGraph,
    theory: Theory,
    rules: IndexMap<String, Vec<usize>>,
    rule_signatures: HashMap<String, Signature>,
    var_types: Vec<HashMap<String, TypeId>>,
}

impl Program {
    pub fn new(theory: &Theory, mut kg: KnowledgeGraph) -> Result<Program> {
        let (theory, synth) = normalize_theory(theory)?;
        let mut rules: IndexMap<String, Vec<usize>> = IndexMap::new();
        for (i, c) in theory.clauses.iter().enumerate() {
            rules.entry(c.head.predicate.clone()).or_default().push(i);
        }
        let inference = infer_types(&theory, &kg, &synth)?;
        for fact in &synth {
            let sig = inference.signatures[&fact.predicate];
            kg.declare_predicate(&fact.predicate, sig)?;
            let args: Vec<&str> = fact.args.iter().map(String::as_str).collect();
            let rel = kg.relation_id(&fact.predicate).expect("declared above");
            let row = kg.symbols_mut().intern(args[0], sig.arg(0));
            if kg.relation(rel).weight(row, 0).is_none() {
                kg.add_fact(&fact.predicate, &args, fact.weight)?;
            }
            if fact.trainable {
                kg.set_trainable(&fact.predicate, true)?;
            }
        }
        let rule_signatures = rules
            .keys()
            .map(|p| (p.clone(), inference.signatures[p]))
            .collect();
        Ok(Program {
            kg,
            theory,
            rules,
            rule_signatures,
            var_types: inference.var_types,
        })
    }

    /// Parses rule, fact, and optional type-declaration texts.
    pub fn from_sources(rules: &str, facts: &str, types: Option<&str>) -> Result<Program> {
        let mut kg = KnowledgeGraph::new();
        if let Some(types) = types {
            kg.load_types(types)?;
        }
        kg.load_facts(facts)?;
        Program::new(&parse_rules(rules)?, kg)
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn kg_mut(&mut self) -> &mut KnowledgeGraph {
        &mut self.kg
    }

    pub fn into_kg(self) -> KnowledgeGraph {
        self.kg
    }

    /// The rewritten, constant-free theory.
    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn clause(&self, index: usize) -> &Clause {
        &self.theory.clauses[index]
    }

    /// Indices of the clauses whose head predicate is `predicate`.
    pub fn rule_indices(&self, predicate: &str) -> &[usize] {
        self.rules.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_rule_predicate(&self, predicate: &str) -> bool {
        self.rules.contains_key(predicate)
    }

    pub fn rule_predicates(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn signature(&self, predicate: &str) -> Option<Signature> {
        self.rule_signatures
            .get(predicate)
            .copied()
            .or_else(|| self.kg.signature(predicate))
    }

    pub fn var_type(&self, clause: usize, var: &str) -> TypeId {
        self.var_types[clause][var]
    }

    /// Rule predicates called from the bodies of `predicate`'s clauses.
    pub fn callees(&self, predicate: &str) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.rule_indices(predicate)
            .iter()
            .flat_map(|&i| &self.theory.clauses[i].body)
            .map(|l| l.predicate.as_str())
            .filter(|p| self.is_rule_predicate(p) && seen.insert(*p))
            .collect()
    }

    /// Whether any rule predicate reaches itself through calls.
    pub fn is_recursive(&self) -> bool {
        self.call_heights().is_none()
    }

    /// A depth bound under which no call is ever cut off: one more than
    /// the longest call chain. `None` for recursive theories, which need
    /// an explicit bound.
    pub fn default_depth(&self) -> Option<usize> {
        self.call_heights()
            .map(|h| h.values().copied().max().unwrap_or(0) + 1)
    }

    fn call_heights(&self) -> Option<HashMap<&str, usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done(usize),
        }
        fn visit<'a>(
            p: &'a str,
            program: &'a Program,
            marks: &mut HashMap<&'a str, Mark>,
        ) -> Option<usize> {
            match marks.get(p) {
                Some(Mark::Active) => return None,
                Some(Mark::Done(h)) => return Some(*h),
                None => {}
            }
            marks.insert(p, Mark::Active);
            let mut height = 0;
            for q in program.callees(p) {
                height = height.max(visit(q, program, marks)? + 1);
            }
            marks.insert(p, Mark::Done(height));
            Some(height)
        }
        let mut marks = HashMap::new();
        for p in self.rules.keys() {
            visit(p, self, &mut marks)?;
        }
        Some(
            marks
                .into_iter()
                .map(|(p, m)| match m {
                    Mark::Done(h) => (p, h),
                    Mark::Active => unreachable!(),
                })
                .collect(),
        )
    }
}

struct Inference {
    signatures: HashMap<String, Signature>,
    var_types: Vec<HashMap<String, TypeId>>,
}

/// Propagates argument types between declared predicate signatures and
/// clause variables until nothing changes. Positions that stay unknown
/// fall back to the default type.
fn infer_types(
    theory: &Theory,
    kg: &KnowledgeGraph,
    synth: &[crate::lang::SynthFact],
) -> Result<Inference> {
    let mut positions: HashMap<String, Vec<Option<TypeId>>> = HashMap::new();
    let arity_of = |lit: &Literal| lit.arity();
    let mut seed = |pred: &str, arity: usize| -> Result<()> {
        if positions.contains_key(pred) {
            if positions[pred].len() != arity {
                return Err(Error::InvalidClause {
                    clause: pred.to_string(),
                    reason: format!(
                        "`{pred}` is used with arities {} and {arity}",
                        positions[pred].len()
                    ),
                });
            }
            return Ok(());
        }
        let slots = match kg.signature(pred) {
            Some(sig) => {
                if sig.arity() != arity {
                    return Err(Error::InvalidClause {
                        clause: pred.to_string(),
                        reason: format!(
                            "`{pred}` has arity {} in the knowledge graph but {arity} in the theory",
                            sig.arity()
                        ),
                    });
                }
                sig.types().into_iter().map(Some).collect()
            }
            None => vec![None; arity],
        };
        positions.insert(pred.to_string(), slots);
        Ok(())
    };
    for clause in &theory.clauses {
        for lit in std::iter::once(&clause.head).chain(&clause.body) {
            seed(&lit.predicate, arity_of(lit))?;
        }
    }
    for fact in synth {
        seed(&fact.predicate, fact.args.len())?;
    }

    let mut var_types: Vec<HashMap<String, TypeId>> = vec![HashMap::new(); theory.clauses.len()];
    let name = |t: TypeId| kg.symbols().type_name(t).to_string();
    loop {
        let mut changed = false;
        for (ci, clause) in theory.clauses.iter().enumerate() {
            let vars = &mut var_types[ci];
            for lit in std::iter::once(&clause.head).chain(&clause.body) {
                let slots = positions.get_mut(&lit.predicate).expect("seeded");
                for (pos, term) in lit.args.iter().enumerate() {
                    let Some(v) = term.as_var() else { continue };
                    match (slots[pos], vars.get(v).copied()) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(Error::TypeConflict {
                                what: format!("variable {v} in `{clause}`"),
                                first: name(b),
                                second: name(a),
                            })
                        }
                        (Some(a), None) => {
                            vars.insert(v.to_string(), a);
                            changed = true;
                        }
                        (None, Some(b)) => {
                            slots[pos] = Some(b);
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Anything still unknown is untyped: use the default type, then
    // re-run propagation so the choice is consistent everywhere.
    let default = kg.symbols().default_type();
    for slots in positions.values_mut() {
        for s in slots.iter_mut().filter(|s| s.is_none()) {
            *s = Some(default);
        }
    }
    for (ci, clause) in theory.clauses.iter().enumerate() {
        for lit in std::iter::once(&clause.head).chain(&clause.body) {
            let slots = &positions[&lit.predicate];
            for (pos, term) in lit.args.iter().enumerate() {
                let Some(v) = term.as_var() else { continue };
                let t = slots[pos].expect("filled");
                match var_types[ci].get(v) {
                    Some(&b) if b != t => {
                        return Err(Error::TypeConflict {
                            what: format!("variable {v} in `{clause}`"),
                            first: name(b),
                            second: name(t),
                        })
                    }
                    Some(_) => {}
                    None => {
                        var_types[ci].insert(v.to_string(), t);
                    }
                }
            }
        }
    }
    

    let signatures = positions
        .into_iter()
        .map(|(p, slots)| {
            let sig = match slots.as_slice() {
                [a] => Signature::Unary(a.expect("filled")),
                [a, b] => Signature::Binary(a.expect("filled"), b.expect("filled")),
                _ => unreachable!("arity validated"),
            };
            (p, sig)
        })
        .collect();
    Ok(Inference {
        signatures,
        var_types,
    })
}
