//! Batched evaluation of compiled functions and reverse-mode gradients.
//!
//! A batch is a dense `rows × dim` matrix, one query per row. Every
//! kernel treats rows independently, so a batch gives the same numbers
//! as evaluating its rows one at a time.

use indexmap::IndexMap;
use ndarray::{Array1, Array2, Axis};

use crate::compiler::{CompiledFunction, FnKey, Matrix, Op, Registry, Space};
use crate::error::{Error, Result};
use crate::kgstore::{KnowledgeGraph, Relation};

/// Gradients of a scalar with respect to each trainable relation's
/// weights, in fact order.
pub type GradientMap = IndexMap<String, Vec<f64>>;

/// Evaluates `key` on a batch without recording anything.
pub fn eval(
    registry: &Registry,
    kg: &KnowledgeGraph,
    key: &FnKey,
    input: &Array2<f64>,
) -> Result<Array2<f64>> {
    let mut session = Session::new(registry, kg);
    session.record = false;
    session.eval(key, input)
}

struct Frame {
    func: std::sync::Arc<CompiledFunction>,
    values: Vec<Array2<f64>>,
    /// Child frame of each Call instruction.
    children: Vec<Option<usize>>,
}

/// Forward values of the last evaluation, kept for the backward pass.
pub struct Tape {
    frames: Vec<Frame>,
    root: usize,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        let f = &self.frames[self.root];
        &f.values[f.func.seq.output]
    }
}

/// Evaluation bound to one registry and one knowledge graph.
pub struct Session<'a> {
    registry: &'a Registry,
    kg: &'a KnowledgeGraph,
    record: bool,
    tape: Option<Tape>,
}

impl<'a> Session<'a> {
    pub fn new(registry: &'a Registry, kg: &'a KnowledgeGraph) -> Self {
        Session {
            registry,
            kg,
            record: true,
            tape: None,
        }
    }

    /// Evaluates `key` on `input` and records a tape for [`Session::grad`].
    pub fn eval(&mut self, key: &FnKey, input: &Array2<f64>) -> Result<Array2<f64>> {
        let func = self
            .registry
            .get(key)
            .ok_or_else(|| Error::UndefinedPredicate(key.to_string()))?;
        let expected = func.input_space().dim(self.kg);
        if input.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: input.ncols(),
            });
        }
        let mut frames = Vec::new();
        let root = self.run(key, input.to_owned(), &mut frames)?;
        let out = {
            let f = &frames[root];
            f.values[f.func.seq.output].clone()
        };
        self.tape = self.record.then_some(Tape { frames, root });
        Ok(out)
    }

    pub fn tape(&self) -> Option<&Tape> {
        self.tape.as_ref()
    }

    fn run(&self, key: &FnKey, input: Array2<f64>, frames: &mut Vec<Frame>) -> Result<usize> {
        let func = self
            .registry
            .get(key)
            .ok_or_else(|| Error::UndefinedPredicate(key.to_string()))?
            .clone();
        let n = input.nrows();
        let kg = self.kg;
        let instrs = &func.seq.instrs;
        let mut values: Vec<Array2<f64>> = Vec::with_capacity(instrs.len());
        let mut children = vec![None; instrs.len()];
        // Calls with the same callee and operand share one child frame.
        let mut memo: std::collections::HashMap<(&FnKey, Option<usize>), usize> =
            std::collections::HashMap::new();
        values.push(input);
        for (r, instr) in instrs.iter().enumerate().skip(1) {
            let dim = instr.space.dim(kg);
            let v = match &instr.op {
                Op::Input => unreachable!("input is register 0"),
                Op::UnaryLoad { id, .. } => {
                    let row = unary_vector(kg.relation(*id), dim);
                    row.broadcast((n, dim)).expect("row broadcast").to_owned()
                }
                Op::MatVec {
                    src,
                    matrix: Matrix::Rel { id, .. },
                    transpose,
                } => matvec(&values[*src], kg.relation(*id), *transpose, dim),
                Op::MatVec {
                    src,
                    matrix: Matrix::Any,
                    ..
                } => {
                    let sums = values[*src].sum_axis(Axis(1));
                    Array2::from_shape_fn((n, dim), |(i, _)| sums[i])
                }
                Op::Hadamard { args } => {
                    let mut acc = values[args[0]].clone();
                    for &a in &args[1..] {
                        acc *= &values[a];
                    }
                    acc
                }
                Op::Ones => Array2::ones((n, dim)),
                Op::Zero => Array2::zeros((n, dim)),
                Op::AnyScale { base, norm_of } => {
                    let sums = values[*norm_of].sum_axis(Axis(1));
                    &values[*base] * &sums.insert_axis(Axis(1))
                }
                Op::ClauseSum { args } => {
                    let mut acc = values[args[0]].clone();
                    for &a in &args[1..] {
                        acc += &values[a];
                    }
                    acc
                }
                Op::Call { callee, src } => {
                    let child = match memo.get(&(callee, *src)) {
                        Some(&c) => c,
                        None => {
                            let child_input = match src {
                                Some(s) => values[*s].clone(),
                                // Every row would see the same ones column,
                                // so evaluate once and broadcast.
                                None => Array2::ones((1, 1)),
                            };
                            let c = self.run(callee, child_input, frames)?;
                            memo.insert((callee, *src), c);
                            c
                        }
                    };
                    children[r] = Some(child);
                    let f = &frames[child];
                    let out = &f.values[f.func.seq.output];
                    if src.is_some() {
                        out.clone()
                    } else {
                        out.broadcast((n, dim)).expect("row broadcast").to_owned()
                    }
                }
            };
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "register {} of {}",
                    instr.name, func.key
                )));
            }
            values.push(v);
        }
        if !self.record {
            // Keep only what the caller reads.
            let out = func.seq.output;
            for (r, v) in values.iter_mut().enumerate() {
                if r != out {
                    *v = Array2::zeros((0, 0));
                }
            }
        }
        frames.push(Frame {
            func,
            values,
            children,
        });
        Ok(frames.len() - 1)
    }

    /// Backpropagates `upstream` (the adjoint of the last output) and
    /// returns the gradient for every trainable relation.
    pub fn grad(&self, upstream: &Array2<f64>) -> Result<GradientMap> {
        let tape = self.tape.as_ref().ok_or(Error::NoTape)?;
        let out = tape.output();
        if upstream.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: upstream.len(),
            });
        }
        let mut grads: IndexMap<usize, Vec<f64>> = self
            .kg
            .trainable()
            .map(|(id, rel)| (id.index(), vec![0.0; rel.len()]))
            .collect();
        self.backward(tape, tape.root, upstream.clone(), &mut grads);
        Ok(self
            .kg
            .trainable()
            .map(|(id, rel)| (rel.name().to_string(), grads.swap_remove(&id.index()).unwrap()))
            .collect())
    }

    /// Returns the adjoint of the frame's input.
    fn backward(
        &self,
        tape: &Tape,
        frame: usize,
        upstream: Array2<f64>,
        grads: &mut IndexMap<usize, Vec<f64>>,
    ) -> Array2<f64> {
        let f = &tape.frames[frame];
        let instrs = &f.func.seq.instrs;
        let values = &f.values;
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; instrs.len()];
        adj[f.func.seq.output] = Some(upstream);
        fn add(adj: &mut [Option<Array2<f64>>], r: usize, g: Array2<f64>) {
            match &mut adj[r] {
                Some(a) => *a += &g,
                slot => *slot = Some(g),
            }
        }
        for r in (1..instrs.len()).rev() {
            let Some(d) = adj[r].take() else { continue };
            match &instrs[r].op {
                Op::Input | Op::Ones | Op::Zero => {}
                Op::UnaryLoad { id, .. } => {
                    if let Some(g) = grads.get_mut(&id.index()) {
                        let col = d.sum_axis(Axis(0));
                        let rel = self.kg.relation(*id);
                        for (k, &row) in rel.rows().iter().enumerate() {
                            g[k] += col[row];
                        }
                    }
                }
                Op::MatVec {
                    src,
                    matrix: Matrix::Rel { id, .. },
                    transpose,
                } => {
                    let rel = self.kg.relation(*id);
                    let x = &values[*src];
                    if let Some(g) = grads.get_mut(&id.index()) {
                        for (k, (&i, &j)) in rel.rows().iter().zip(rel.cols()).enumerate() {
                            let (a, b) = if *transpose { (j, i) } else { (i, j) };
                            g[k] += x.column(a).dot(&d.column(b));
                        }
                    }
                    let back = matvec(&d, rel, !*transpose, x.ncols());
                    add(&mut adj, *src, back);
                }
                Op::MatVec {
                    src,
                    matrix: Matrix::Any,
                    ..
                } => {
                    let sums = d.sum_axis(Axis(1));
                    let cols = values[*src].ncols();
                    let rows = d.nrows();
                    add(
                        &mut adj,
                        *src,
                        Array2::from_shape_fn((rows, cols), |(i, _)| sums[i]),
                    );
                }
                Op::Hadamard { args } => {
                    for (i, &a) in args.iter().enumerate() {
                        let mut g = d.clone();
                        for (j, &b) in args.iter().enumerate() {
                            if i != j {
                                g *= &values[b];
                            }
                        }
                        add(&mut adj, a, g);
                    }
                }
                Op::AnyScale { base, norm_of } => {
                    let sums = values[*norm_of].sum_axis(Axis(1)).insert_axis(Axis(1));
                    add(&mut adj, *base, &d * &sums);
                    let inner = (&d * &values[*base]).sum_axis(Axis(1));
                    let cols = values[*norm_of].ncols();
                    add(
                        &mut adj,
                        *norm_of,
                        Array2::from_shape_fn((d.nrows(), cols), |(i, _)| inner[i]),
                    );
                }
                Op::ClauseSum { args } => {
                    for &a in args {
                        add(&mut adj, a, d.clone());
                    }
                }
                Op::Call { src, .. } => {
                    let child = f.children[r].expect("recorded call");
                    match src {
                        Some(s) => {
                            let back = self.backward(tape, child, d, grads);
                            add(&mut adj, *s, back);
                        }
                        None => {
                            let summed = d.sum_axis(Axis(0)).insert_axis(Axis(0));
                            self.backward(tape, child, summed, grads);
                        }
                    }
                }
            }
        }
        adj[0]
            .take()
            .unwrap_or_else(|| Array2::zeros(values[0].dim()))
    }
}

fn unary_vector(rel: &Relation, dim: usize) -> Array1<f64> {
    let mut v = Array1::zeros(dim);
    for (row, _, w) in rel.facts() {
        v[row] += w;
    }
    v
}

/// `x · M` (or `x · Mᵀ`) for a sparse relation matrix.
fn matvec(x: &Array2<f64>, rel: &Relation, transpose: bool, out_dim: usize) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, out_dim));
    let to = if transpose { rel.rows() } else { rel.cols() };
    let w = rel.weights();
    for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
        for i in 0..d {
            let xi = xr[i];
            if xi == 0.0 {
                continue;
            }
            let facts = if transpose {
                rel.col_facts(i)
            } else {
                rel.row_facts(i)
            };
            for &k in facts {
                or[to[k]] += xi * w[k];
            }
        }
    }
    out
}

/// Row-normalizes `g` by its 1-norm. Rows summing to zero stay zero and
/// are flagged `true`.
pub fn normalize_ratio(g: &Array2<f64>) -> Result<(Array2<f64>, Vec<bool>)> {
    let mut out = g.clone();
    let mut zero = Vec::with_capacity(g.nrows());
    for mut row in out.rows_mut() {
        if row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain("normalization needs finite nonnegative scores".into()));
        }
        let s = row.sum();
        if s > 0.0 {
            row /= s;
            zero.push(false);
        } else {
            zero.push(true);
        }
    }
    Ok((out, zero))
}

/// Row-wise softmax, shifted by the row maximum for stability.
pub fn softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Evaluates `key` for each input id, `chunk` rows at a time, and
/// stacks the results.
pub fn eval_ids(
    registry: &Registry,
    kg: &KnowledgeGraph,
    key: &FnKey,
    ids: &[usize],
    chunk: usize,
) -> Result<Array2<f64>> {
    let f = registry
        .get(key)
        .ok_or_else(|| Error::UndefinedPredicate(key.to_string()))?;
    let mut out = Array2::zeros((0, f.output_space().dim(kg)));
    for part in ids.chunks(chunk.max(1)) {
        let g = eval(registry, kg, key, &input_batch(f.input_space(), kg, part))?;
        out.append(Axis(0), g.view()).expect("same width");
    }
    Ok(out)
}

/// A batch of one-hot rows, one per constant id.
pub fn onehot_batch(ids: &[usize], dim: usize) -> Array2<f64> {
    let mut x = Array2::zeros((ids.len(), dim));
    for (r, &c) in ids.iter().enumerate() {
        x[[r, c]] = 1.0;
    }
    x
}

/// The input batch for a mode: one-hot rows in the input space, or a
/// ones column per query when there is no bound argument.
pub fn input_batch(space: Space, kg: &KnowledgeGraph, ids: &[usize]) -> Array2<f64> {
    match space {
        Space::Unit => Array2::ones((ids.len(), 1)),
        Space::Domain(t) => onehot_batch(ids, kg.domain_size(t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Mode;
    use crate::program::Program;
    use ndarray::array;

    fn setup(rules: &str, facts: &str) -> Program {
        Program::from_sources(rules, facts, None).unwrap()
    }

    #[test]
    fn matvec_follows_edges() {
        let p = setup("q(X,Y):-e(X,Y).", "e\ta\tb\t0.5\ne\ta\tc\t0.25\n");
        let id = p.kg().relation_id("e").unwrap();
        let rel = p.kg().relation(id);
        let x = array![[1.0, 0.0, 0.0]];
        assert_eq!(matvec(&x, rel, false, 3), array![[0.0, 0.5, 0.25]]);
        let y = array![[0.0, 1.0, 1.0]];
        assert_eq!(matvec(&y, rel, true, 3), array![[0.75, 0.0, 0.0]]);
    }

    #[test]
    fn grad_without_eval_is_an_error() {
        let p = setup("q(X,Y):-e(X,Y).", "e\ta\tb\n");
        let registry = Registry::new(&p, None).unwrap();
        let s = Session::new(&registry, p.kg());
        assert!(matches!(s.grad(&array![[1.0]]), Err(Error::NoTape)));
    }

    #[test]
    fn input_width_is_checked() {
        let p = setup("q(X,Y):-e(X,Y).", "e\ta\tb\n");
        let mode = Mode::parse("q/io").unwrap();
        let mut registry = Registry::new(&p, None).unwrap();
        let f = registry.compile(&p, &mode).unwrap();
        let err = eval(&registry, p.kg(), &f.key, &Array2::zeros((1, 5))).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 5 }));
    }

    #[test]
    fn normalize_flags_zero_rows() {
        let (f, zero) = normalize_ratio(&array![[1.0, 3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(f, array![[0.25, 0.75], [0.0, 0.0]]);
        assert_eq!(zero, [false, true]);
        assert!(normalize_ratio(&array![[-1.0, 2.0]]).is_err());
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&array![[1.0, 2.0, 3.0]]);
        let b = softmax(&array![[1001.0, 1002.0, 1003.0]]);
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-12));
        assert!((a.sum() - 1.0).abs() < 1e-12);
    }
}
