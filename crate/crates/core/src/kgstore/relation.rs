use std::collections::HashMap;
use std::sync::OnceLock;

use super::TypeId;

/// Argument types of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Signature {
    Unary(TypeId),
    Binary(TypeId, TypeId),
}

impl Signature {
    pub fn arity(self) -> usize {
        match self {
            Signature::Unary(_) => 1,
            Signature::Binary(..) => 2,
        }
    }

    pub fn arg(self, position: usize) -> TypeId {
        match (self, position) {
            (Signature::Unary(t), 0) => t,
            (Signature::Binary(t, _), 0) => t,
            (Signature::Binary(_, t), 1) => t,
            _ => panic!("argument position {position} out of range for {self:?}"),
        }
    }

    pub fn types(self) -> Vec<TypeId> {
        match self {
            Signature::Unary(t) => vec![t],
            Signature::Binary(a, b) => vec![a, b],
        }
    }
}

/// Row/column adjacency over fact indices, built lazily for the kernels.
#[derive(Debug)]
struct Layout {
    row_start: Vec<usize>,
    row_facts: Vec<usize>,
    col_start: Vec<usize>,
    col_facts: Vec<usize>,
}

impl Layout {
    fn build(rows: &[usize], cols: &[usize]) -> Self {
        let (row_start, row_facts) = bucket(rows);
        let (col_start, col_facts) = bucket(cols);
        Layout {
            row_start,
            row_facts,
            col_start,
            col_facts,
        }
    }
}

fn bucket(keys: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = keys.iter().map(|&k| k + 1).max().unwrap_or(0);
    let mut start = vec![0usize; n + 1];
    for &k in keys {
        start[k + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut facts = vec![0usize; keys.len()];
    for (fact, &k) in keys.iter().enumerate() {
        facts[fill[k]] = fact;
        fill[k] += 1;
    }
    (start, facts)
}

/// The weighted facts of one predicate: the sparse matrix `M_p` for a
/// binary predicate or the sparse vector `v_q` for a unary one.
///
/// Facts are kept in insertion order; gradient vectors are aligned with
/// that order. The nonzero pattern never changes once loading is over,
/// only the weights do.
#[derive(Debug)]
pub struct Relation {
    name: String,
    signature: Signature,
    rows: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    index: HashMap<(usize, usize), usize>,
    trainable: bool,
    layout: OnceLock<Layout>,
}

impl Clone for Relation {
    fn clone(&self) -> Self {
        Relation {
            name: self.name.clone(),
            signature: self.signature,
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            weights: self.weights.clone(),
            index: self.index.clone(),
            trainable: self.trainable,
            layout: OnceLock::new(),
        }
    }
}

impl Relation {
    pub fn new(name: &str, signature: Signature) -> Self {
        Relation {
            name: name.to_string(),
            signature,
            rows: Vec::new(),
            cols: Vec::new(),
            weights: Vec::new(),
            index: HashMap::new(),
            trainable: false,
            layout: OnceLock::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn is_unary(&self) -> bool {
        matches!(self.signature, Signature::Unary(_))
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub(crate) fn set_trainable(&mut self, flag: bool) {
        self.trainable = flag;
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Inserts a fact; returns `false` (and changes nothing) if the
    /// coordinate is already present. Unary facts use column 0.
    pub(crate) fn insert(&mut self, row: usize, col: usize, weight: f64) -> bool {
        if self.index.contains_key(&(row, col)) {
            return false;
        }
        self.index.insert((row, col), self.weights.len());
        self.rows.push(row);
        self.cols.push(col);
        self.weights.push(weight);
        self.layout = OnceLock::new();
        true
    }

    pub fn fact_index(&self, row: usize, col: usize) -> Option<usize> {
        self.index.get(&(row, col)).copied()
    }

    pub fn weight(&self, row: usize, col: usize) -> Option<f64> {
        self.fact_index(row, col).map(|k| self.weights[k])
    }

    /// `(row, col, weight)` for every fact, in fact order.
    pub fn facts(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.weights)
            .map(|((&r, &c), &w)| (r, c, w))
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces every weight; the support is unchanged.
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.weights.len(), "weight vector length");
        self.weights.copy_from_slice(weights);
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn layout(&self) -> &Layout {
        self.layout
            .get_or_init(|| Layout::build(&self.rows, &self.cols))
    }

    /// Fact indices whose row is `row`.
    pub fn row_facts(&self, row: usize) -> &[usize] {
        let layout = self.layout();
        if row + 1 >= layout.row_start.len() {
            return &[];
        }
        &layout.row_facts[layout.row_start[row]..layout.row_start[row + 1]]
    }

    /// Fact indices whose column is `col`.
    pub fn col_facts(&self, col: usize) -> &[usize] {
        let layout = self.layout();
        if col + 1 >= layout.col_start.len() {
            return &[];
        }
        &layout.col_facts[layout.col_start[col]..layout.col_start[col + 1]]
    }
}
