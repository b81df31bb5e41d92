//! Constants, types, and weighted relations.
//!
//! A [`KnowledgeGraph`] interns constants per type and stores each
//! predicate's facts as a [`Relation`]. The weights of trainable relations
//! form the parameter set that the learner updates.

mod relation;
mod symbols;

use std::fmt::Write as _;

use indexmap::IndexMap;
use ndarray::Array1;

use crate::error::{Error, Result};

pub use relation::{Relation, Signature};
pub use symbols::{SymbolTable, TypeId, DEFAULT_TYPE};

/// Index of a relation in its [`KnowledgeGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub(crate) usize);

impl RelId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    symbols: SymbolTable,
    relations: IndexMap<String, Relation>,
    declared: IndexMap<String, Signature>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn symbols_mut(&mut self) -> &mut SymbolTable {
        &mut self.symbols
    }

    pub fn declare_type(&mut self, name: &str) -> TypeId {
        self.symbols.declare_type(name)
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId> {
        self.symbols
            .type_id(name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn intern(&mut self, name: &str, ty: &str) -> Result<usize> {
        let ty = self.type_id(ty)?;
        Ok(self.symbols.intern(name, ty))
    }

    pub fn constant(&self, name: &str, ty: TypeId) -> Result<usize> {
        self.symbols
            .lookup(name, ty)
            .ok_or_else(|| Error::UnknownConstant {
                name: name.to_string(),
                ty: self.symbols.type_name(ty).to_string(),
            })
    }

    pub fn domain_size(&self, ty: TypeId) -> usize {
        self.symbols.size(ty)
    }

    /// Declares a predicate signature. Re-declaring with the same signature
    /// is a no-op; a different one is a type conflict.
    pub fn declare_predicate(&mut self, name: &str, signature: Signature) -> Result<RelId> {
        if let Some(existing) = self.declared.get(name) {
            if *existing != signature {
                return Err(Error::TypeConflict {
                    what: format!("predicate `{name}`"),
                    first: self.describe(*existing),
                    second: self.describe(signature),
                });
            }
        } else {
            self.declared.insert(name.to_string(), signature);
        }
        let entry = self.relations.entry(name.to_string());
        let id = RelId(entry.index());
        entry.or_insert_with(|| Relation::new(name, signature));
        Ok(id)
    }

    pub fn signature(&self, predicate: &str) -> Option<Signature> {
        self.declared.get(predicate).copied()
    }

    pub fn describe(&self, signature: Signature) -> String {
        let names: Vec<&str> = signature
            .types()
            .into_iter()
            .map(|t| self.symbols.type_name(t))
            .collect();
        format!("({})", names.join(","))
    }

    pub fn relation_id(&self, predicate: &str) -> Option<RelId> {
        self.relations.get_index_of(predicate).map(RelId)
    }

    pub fn relation(&self, id: RelId) -> &Relation {
        &self.relations[id.0]
    }

    pub fn relation_mut(&mut self, id: RelId) -> &mut Relation {
        &mut self.relations[id.0]
    }

    pub fn relation_by_name(&self, predicate: &str) -> Option<&Relation> {
        self.relations.get(predicate)
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelId, &Relation)> {
        self.relations
            .values()
            .enumerate()
            .map(|(i, r)| (RelId(i), r))
    }

    pub fn has_predicate(&self, predicate: &str) -> bool {
        self.relations.contains_key(predicate)
    }

    pub fn fact_count(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    /// Adds one fact, declaring the predicate with the default type if it
    /// has no declaration yet.
    pub fn add_fact(&mut self, predicate: &str, args: &[&str], weight: f64) -> Result<()> {
        let render = || format!("{predicate}({})", args.join(","));
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::NegativeWeight {
                line: 0,
                fact: render(),
                weight,
            });
        }
        let signature = match self.declared.get(predicate) {
            Some(sig) => *sig,
            None => {
                let t = self.symbols.default_type();
                match args.len() {
                    1 => Signature::Unary(t),
                    2 => Signature::Binary(t, t),
                    _ => return Err(Error::Arity(render())),
                }
            }
        };
        if signature.arity() != args.len() {
            return Err(Error::InvalidClause {
                clause: render(),
                reason: format!("`{predicate}` has arity {}", signature.arity()),
            });
        }
        let rel = self.declare_predicate(predicate, signature)?;
        let row = self.symbols.intern(args[0], signature.arg(0));
        let col = match signature {
            Signature::Binary(_, t) => self.symbols.intern(args[1], t),
            Signature::Unary(_) => 0,
        };
        if !self.relations[rel.0].insert(row, col, weight) {
            return Err(Error::DuplicateFact(render()));
        }
        Ok(())
    }

    pub fn set_trainable(&mut self, predicate: &str, flag: bool) -> Result<()> {
        let rel = self
            .relations
            .get_mut(predicate)
            .ok_or_else(|| Error::UnknownPredicate(predicate.to_string()))?;
        rel.set_trainable(flag);
        Ok(())
    }

    pub fn trainable(&self) -> impl Iterator<Item = (RelId, &Relation)> {
        self.relations().filter(|(_, r)| r.trainable())
    }

    /// The one-hot row vector `u_c` of constant `c` in type `ty`.
    pub fn onehot(&self, c: usize, ty: TypeId) -> Result<Array1<f64>> {
        let size = self.symbols.size(ty);
        if c >= size {
            return Err(Error::IndexOutOfRange {
                index: c,
                ty: self.symbols.type_name(ty).to_string(),
                size,
            });
        }
        let mut v = Array1::zeros(size);
        v[c] = 1.0;
        Ok(v)
    }

    /// Reads type declarations: `predicate<TAB>type1[<TAB>type2]`.
    pub fn load_types(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let signature = match fields.as_slice() {
                [_, a] => Signature::Unary(self.declare_type(a)),
                [_, a, b] => {
                    let a = self.declare_type(a);
                    Signature::Binary(a, self.declare_type(b))
                }
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        column: 1,
                        message: "expected `predicate<TAB>type[<TAB>type]`".into(),
                    })
                }
            };
            self.declare_predicate(fields[0], signature)?;
        }
        Ok(())
    }

    /// Reads a fact file: `predicate<TAB>arg1[<TAB>arg2][<TAB>weight]`.
    ///
    /// When a predicate's arity is known (declared, or seen on an earlier
    /// line) it decides how a three-field line splits. Otherwise a third
    /// field is a weight only if it is written as a decimal float with a
    /// point or an exponent.
    pub fn load_facts(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                column: 1,
                message,
            };
            if fields.len() < 2 || fields.len() > 4 || fields.iter().any(|f| f.is_empty()) {
                return Err(parse_err(format!("malformed fact line `{line}`")));
            }
            let predicate = fields[0];
            let known = self.declared.get(predicate).map(|s| s.arity());
            let arity = match (fields.len(), known) {
                (2, _) => 1,
                (4, _) => 2,
                (3, Some(a)) => a,
                (3, None) => {
                    if looks_like_weight(fields[2]) {
                        1
                    } else {
                        2
                    }
                }
                _ => unreachable!(),
            };
            let args = &fields[1..1 + arity];
            let weight = match fields.get(1 + arity) {
                None => 1.0,
                Some(w) => w
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("bad weight `{w}`")))?,
            };
            if fields.len() > 2 + arity {
                return Err(parse_err(format!(
                    "too many fields for `{predicate}` of arity {arity}"
                )));
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight {
                    line: line_no,
                    fact: format!("{predicate}({})", args.join(",")),
                    weight,
                });
            }
            if !weight.is_finite() {
                return Err(parse_err(format!("non-finite weight `{weight}`")));
            }
            match self.add_fact(predicate, args, weight) {
                Err(Error::Arity(f)) | Err(Error::InvalidClause { clause: f, .. }) => {
                    return Err(parse_err(format!("arity mismatch in {f}")))
                }
                other => other?,
            }
        }
        Ok(())
    }

    /// Writes every fact in the fact-file format; weights are printed so
    /// that they read back bit-identically.
    pub fn write_facts(&self) -> String {
        let mut out = String::new();
        for rel in self.relations.values() {
            let sig = rel.signature();
            for (r, c, w) in rel.facts() {
                let a = self.symbols.name(sig.arg(0), r).unwrap_or("?");
                match sig {
                    Signature::Unary(_) => writeln!(out, "{}\t{a}\t{w:?}", rel.name()),
                    Signature::Binary(_, t) => {
                        let b = self.symbols.name(t, c).unwrap_or("?");
                        writeln!(out, "{}\t{a}\t{b}\t{w:?}", rel.name())
                    }
                }
                .expect("writing to a String");
            }
        }
        out
    }

    pub fn write_types(&self) -> String {
        let mut out = String::new();
        for (name, sig) in &self.declared {
            let types: Vec<&str> = sig
                .types()
                .into_iter()
                .map(|t| self.symbols.type_name(t))
                .collect();
            writeln!(out, "{name}\t{}", types.join("\t")).expect("writing to a String");
        }
        out
    }
}

fn looks_like_weight(field: &str) -> bool {
    field.parse::<f64>().is_ok() && field.contains(['.', 'e', 'E'])
}

/// Parses a fact file into a fresh graph.
pub fn load_facts(text: &str) -> Result<KnowledgeGraph> {
    let mut kg = KnowledgeGraph::new();
    kg.load_facts(text)?;
    Ok(kg)
}
