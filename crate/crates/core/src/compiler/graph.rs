//! Influence graphs and per-clause factor graphs.

use std::fmt;

use crate::error::{Error, Result};
use crate::lang::{Clause, Direction};

/// Body literals as vertices, with one edge per variable shared by a
/// pair of literals. Two literals sharing two variables therefore get a
/// double edge, which counts as a cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfluenceGraph {
    pub vertices: usize,
    /// `(i, j, variable)` with `i < j`.
    pub edges: Vec<(usize, usize, String)>,
}

impl InfluenceGraph {
    pub fn components(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices);
        for (a, b, _) in &self.edges {
            uf.union(*a, *b);
        }
        uf.count()
    }
}

pub fn influence_graph(clause: &Clause) -> InfluenceGraph {
    let mut edges = Vec::new();
    for (i, a) in clause.body.iter().enumerate() {
        for (j, b) in clause.body.iter().enumerate().skip(i + 1) {
            for v in a.vars() {
                if b.vars().any(|w| w == v) {
                    edges.push((i, j, v.to_string()));
                }
            }
        }
    }
    InfluenceGraph {
        vertices: clause.body.len(),
        edges,
    }
}

/// Every connected component is a tree.
pub fn is_polytree(graph: &InfluenceGraph) -> bool {
    graph.edges.len() + graph.components() == graph.vertices
}

/// A factor: a body literal, or an `any` factor joining two components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    /// `None` for `any`.
    pub predicate: Option<String>,
    /// Variable indices in argument order.
    pub vars: Vec<usize>,
    /// One-based position: body literals first, then `any` factors.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorGraph {
    /// Body variables in order of first appearance.
    pub variables: Vec<String>,
    pub factors: Vec<Factor>,
    pub input: Option<usize>,
    pub output: Option<usize>,
}

impl FactorGraph {
    /// The variable whose marginal the clause returns: the output when
    /// there is one, otherwise the input.
    pub fn root(&self) -> usize {
        self.output.or(self.input).expect("a head has at least one argument")
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    /// Factors touching `var`, in factor order.
    pub fn neighbors(&self, var: usize) -> impl Iterator<Item = usize> + '_ {
        self.factors
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.vars.contains(&var))
            .map(|(i, _)| i)
    }

    pub fn any_factors(&self) -> usize {
        self.factors.iter().filter(|f| f.predicate.is_none()).count()
    }

    /// Graphviz rendering: variables as ellipses, factors as boxes.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("graph \"{name}\" {{\n");
        for (i, v) in self.variables.iter().enumerate() {
            let style = if Some(i) == self.input {
                ", style=filled, fillcolor=lightblue"
            } else if Some(i) == self.output {
                ", style=filled, fillcolor=lightgreen"
            } else {
                ""
            };
            out.push_str(&format!("  v{i} [label=\"{v}\"{style}];\n"));
        }
        for f in &self.factors {
            let label = f.predicate.as_deref().unwrap_or("any");
            out.push_str(&format!("  f{} [shape=box, label=\"{label}\"];\n", f.index));
            for &v in &f.vars {
                out.push_str(&format!("  f{} -- v{v};\n", f.index));
            }
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for FactorGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let star = |i: usize| {
            if Some(i) == self.input || Some(i) == self.output {
                "*"
            } else {
                ""
            }
        };
        for factor in &self.factors {
            let args: Vec<String> = factor
                .vars
                .iter()
                .map(|&v| format!("{}{}", self.variables[v], star(v)))
                .collect();
            writeln!(
                f,
                "{}: {}({})",
                factor.index,
                factor.predicate.as_deref().unwrap_or("any"),
                args.join(",")
            )?;
        }
        Ok(())
    }
}

/// Builds the factor graph of `clause` queried in `direction`, adding
/// `any` factors from the root variable to every other component.
pub fn build_factor_graph(clause: &Clause, direction: Direction) -> Result<FactorGraph> {
    if clause.head.arity() != direction.arity() {
        return Err(Error::BadMode(format!(
            "mode {} does not fit the head of `{clause}`",
            direction.as_str()
        )));
    }
    clause.validate()?;
    if !is_polytree(&influence_graph(clause)) {
        return Err(Error::NotPolytree(clause.to_string()));
    }
    let mut variables: Vec<String> = Vec::new();
    for lit in &clause.body {
        for v in lit.vars() {
            if !variables.iter().any(|w| w == v) {
                variables.push(v.to_string());
            }
        }
    }
    let index_of = |name: &str| variables.iter().position(|v| v == name);
    let mut factors: Vec<Factor> = clause
        .body
        .iter()
        .enumerate()
        .map(|(i, lit)| Factor {
            predicate: Some(lit.predicate.clone()),
            vars: lit.vars().map(|v| index_of(v).expect("collected")).collect(),
            index: i + 1,
        })
        .collect();
    let head_var = |pos: Option<usize>| -> Result<Option<usize>> {
        pos.map(|p| {
            let name = clause.head.args[p].name();
            index_of(name).ok_or_else(|| Error::InvalidClause {
                clause: clause.to_string(),
                reason: format!("head variable {name} does not occur in the body"),
            })
        })
        .transpose()
    };
    let input = head_var(direction.input_position())?;
    let output = head_var(direction.output_position())?;

    let mut uf = UnionFind::new(variables.len());
    for f in &factors {
        if let [a, b] = f.vars[..] {
            uf.union(a, b);
        }
    }
    let root = output.or(input).expect("head has an argument");
    let mut seen = vec![false; variables.len()];
    seen[uf.find(root)] = true;
    let mut next = factors.len() + 1;
    for v in 0..variables.len() {
        let c = uf.find(v);
        if seen[c] {
            continue;
        }
        seen[c] = true;
        // The component's representative: its last-introduced variable
        // other than the input, so that the input's evidence flows
        // through the rest of the component first.
        let members: Vec<usize> = (0..variables.len()).filter(|&w| uf.find(w) == c).collect();
        let rep = members
            .iter()
            .rev()
            .copied()
            .find(|&w| Some(w) != input)
            .unwrap_or(members[0]);
        factors.push(Factor {
            predicate: None,
            vars: vec![root, rep],
            index: next,
        });
        next += 1;
    }
    Ok(FactorGraph {
        variables,
        factors,
        input,
        output,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }

    fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}
