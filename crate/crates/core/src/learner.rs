//! Gradient training of fact weights.
//!
//! Weights are optimized through the softplus reparameterization
//! `θ = ln(1 + e^θ̃)`, which keeps every weight positive without
//! projection. The compiled functions and relation supports never change;
//! only the weight vectors of trainable relations move.

use std::collections::HashMap;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compiler::{FnKey, Registry, Space};
use crate::error::{Error, Result};
use crate::lang::ExampleSet;
use crate::program::Program;
use crate::runtime::{eval, input_batch, softmax, GradientMap, Session};

/// Weight given to a trainable fact that starts at zero, since the
/// reparameterization cannot represent zero exactly.
pub const MIN_INITIAL_WEIGHT: f64 = 1e-6;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn inverse_softplus(theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!(
            "softplus inverse needs a positive weight, got {theta}"
        )));
    }
    Ok(if theta > 30.0 {
        theta + (-(-theta).exp()).ln_1p()
    } else {
        theta.exp_m1().ln()
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// Cross-entropy against `softmax(g)`, targets row-normalized.
    SoftmaxCrossEntropy,
    /// Elementwise sigmoid cross-entropy on `g + b` with a learned bias
    /// per predicate.
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    /// Per-coordinate step sizes from accumulated squared gradients.
    Adagrad,
}

#[derive(Clone, Debug)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub rate: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub l1: f64,
    pub l2: f64,
    /// Rescales the update when the gradient's global norm exceeds this.
    pub clip: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 30,
            rate: 0.1,
            batch_size: 100,
            loss: LossKind::SoftmaxCrossEntropy,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            l1: 0.0,
            l2: 0.0,
            clip: None,
        }
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.rate > 0.0) {
            return Err(Error::Config(
                "epochs, batch size, and rate must be positive".into(),
            ));
        }
        if self.l1 < 0.0 || self.l2 < 0.0 || self.clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config(
                "regularization weights must be nonnegative and the clip positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean loss over rows and its gradient with respect to `pred`.
/// `bias` is only used by the sigmoid loss.
pub fn loss(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    kind: LossKind,
    bias: f64,
) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            found: target.len(),
        });
    }
    if target.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Domain("targets must be nonnegative".into()));
    }
    let n = pred.nrows().max(1) as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut total = 0.0;
    match kind {
        LossKind::SoftmaxCrossEntropy => {
            let p = softmax(pred);
            for ((t, (pr, x)), mut g) in target
                .rows()
                .into_iter()
                .zip(p.rows().into_iter().zip(pred.rows()))
                .zip(grad.rows_mut())
            {
                let z = t.sum();
                if z == 0.0 {
                    continue;
                }
                // log softmax computed directly for accuracy.
                let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                for j in 0..x.len() {
                    let tj = t[j] / z;
                    if tj > 0.0 {
                        total -= tj * (x[j] - lse);
                    }
                    g[j] = (pr[j] - tj) / n;
                }
            }
        }
        LossKind::Sigmoid => {
            for ((&x, &t), g) in pred.iter().zip(target).zip(grad.iter_mut()) {
                let z = x + bias;
                total += softplus(z) - t * z;
                *g = (sigmoid(z) - t) / n;
            }
        }
    }
    Ok((total / n, grad))
}

/// One example set compiled and encoded as dense batches.
#[derive(Clone, Debug)]
pub struct EncodedSet {
    pub key: FnKey,
    pub input_space: Space,
    pub inputs: Vec<usize>,
    pub targets: Array2<f64>,
}

impl EncodedSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn rows(&self, rows: &[usize], program: &Program) -> (Array2<f64>, Array2<f64>) {
        let ids: Vec<usize> = rows.iter().map(|&r| self.inputs[r]).collect();
        let x = input_batch(self.input_space, program.kg(), &ids);
        let t = self.targets.select(ndarray::Axis(0), rows);
        (x, t)
    }
}

/// Compiles each set's mode and maps its constants to ids.
pub fn encode(program: &Program, registry: &mut Registry, sets: &[ExampleSet]) -> Result<Vec<EncodedSet>> {
    let kg = program.kg();
    let mut out = Vec::new();
    for set in sets {
        let f = registry.compile(program, &set.mode)?;
        let input_space = f.input_space();
        let out_space = f.output_space();
        let mut targets = Array2::zeros((set.len(), out_space.dim(kg)));
        let mut inputs = Vec::with_capacity(set.len());
        for (r, ex) in set.examples.iter().enumerate() {
            inputs.push(match (input_space, &ex.input) {
                (Space::Domain(t), Some(c)) => kg.constant(c, t)?,
                (Space::Unit, None) => 0,
                _ => return Err(Error::BadMode(format!("example does not fit {}", set.mode))),
            });
            for (a, w) in &ex.answers {
                let j = match out_space {
                    Space::Domain(t) => kg.constant(a, t)?,
                    Space::Unit => 0,
                };
                targets[[r, j]] += w;
            }
        }
        out.push(EncodedSet {
            key: f.key.clone(),
            input_space,
            inputs,
            targets,
        });
    }
    Ok(out)
}

/// A minibatch: rows of the encoded sets, grouped by set.
pub type Batch = Vec<(usize, Vec<usize>)>;

pub struct Trainer {
    program: Program,
    registry: Registry,
    sets: Vec<EncodedSet>,
    config: TrainingConfig,
    /// Unconstrained parameters per trainable predicate.
    theta: IndexMap<String, Vec<f64>>,
    bias: HashMap<String, f64>,
    accum: IndexMap<String, Vec<f64>>,
    bias_accum: HashMap<String, f64>,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(
        mut program: Program,
        mut registry: Registry,
        sets: &[ExampleSet],
        config: TrainingConfig,
    ) -> Result<Trainer> {
        config.validate()?;
        if sets.iter().all(ExampleSet::is_empty) {
            return Err(Error::Config("no training examples".into()));
        }
        let trainable: Vec<String> = program
            .kg()
            .trainable()
            .map(|(_, r)| r.name().to_string())
            .collect();
        // With nothing trainable, training only reports the loss.
        let mut theta = IndexMap::new();
        for name in &trainable {
            let id = program.kg().relation_id(name).expect("listed");
            let rel = program.kg_mut().relation_mut(id);
            let w = rel.weights_mut();
            let mut t = Vec::with_capacity(w.len());
            for x in w.iter_mut() {
                if *x <= 0.0 {
                    *x = MIN_INITIAL_WEIGHT;
                }
                t.push(inverse_softplus(*x)?);
            }
            theta.insert(name.clone(), t);
        }
        let encoded = encode(&program, &mut registry, sets)?;
        let bias = encoded
            .iter()
            .map(|s| (s.key.predicate.clone(), 0.0))
            .collect();
        let accum = theta
            .iter()
            .map(|(k, v)| (k.clone(), vec![0.0; v.len()]))
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trainer = Trainer {
            program,
            registry,
            sets: encoded,
            config,
            theta,
            bias,
            accum,
            bias_accum: HashMap::new(),
            rng,
        };
        Ok(trainer)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn into_parts(self) -> (Program, Registry) {
        (self.program, self.registry)
    }

    pub fn sets(&self) -> &[EncodedSet] {
        &self.sets
    }

    /// The unconstrained parameters.
    pub fn theta(&self) -> &IndexMap<String, Vec<f64>> {
        &self.theta
    }

    /// Overwrites one unconstrained parameter and its weight.
    pub fn set_theta(&mut self, predicate: &str, index: usize, value: f64) -> Result<()> {
        let slot = self
            .theta
            .get_mut(predicate)
            .and_then(|t| t.get_mut(index))
            .ok_or_else(|| Error::UnknownPredicate(format!("{predicate}[{index}]")))?;
        *slot = value;
        self.write_weight(predicate, index);
        Ok(())
    }

    pub fn bias(&self, predicate: &str) -> f64 {
        self.bias.get(predicate).copied().unwrap_or(0.0)
    }

    /// Copies one parameter into the knowledge graph. Untouched
    /// coordinates keep their loaded weights bit for bit, since the
    /// softplus round trip is not exact.
    fn write_weight(&mut self, name: &str, k: usize) {
        let id = self.program.kg().relation_id(name).expect("trainable");
        self.program.kg_mut().relation_mut(id).weights_mut()[k] = softplus(self.theta[name][k]);
    }

    /// The whole training set as one batch.
    pub fn full_batch(&self) -> Batch {
        self.sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (0..s.len()).collect()))
            .collect()
    }

    /// Shuffled minibatches for one epoch, mixing all sets.
    pub fn batches(&mut self) -> Vec<Batch> {
        let mut rows: Vec<(usize, usize)> = self
            .sets
            .iter()
            .enumerate()
            .flat_map(|(i, s)| (0..s.len()).map(move |r| (i, r)))
            .collect();
        rows.shuffle(&mut self.rng);
        rows.chunks(self.config.batch_size)
            .map(|chunk| {
                let mut by_set: IndexMap<usize, Vec<usize>> = IndexMap::new();
                for &(i, r) in chunk {
                    by_set.entry(i).or_default().push(r);
                }
                by_set.into_iter().collect()
            })
            .collect()
    }

    /// Loss on a batch and its gradient with respect to θ̃ (and biases),
    /// regularization included.
    pub fn gradient(&self, batch: &Batch) -> Result<(f64, GradientMap, HashMap<String, f64>)> {
        let rows: usize = batch.iter().map(|(_, r)| r.len()).sum();
        let mut total = 0.0;
        let mut grads: GradientMap = self
            .theta
            .iter()
            .map(|(k, v)| (k.clone(), vec![0.0; v.len()]))
            .collect();
        let mut bias_grads = HashMap::new();
        for (set, rs) in batch {
            let s = &self.sets[*set];
            let (x, t) = s.rows(rs, &self.program);
            let mut session = Session::new(&self.registry, self.program.kg());
            let g = session.eval(&s.key, &x)?;
            let b = self.bias(&s.key.predicate);
            let (l, dg) = loss(&g, &t, self.config.loss, b)?;
            // `loss` averages over this group; reweight to the batch.
            let share = rs.len() as f64 / rows as f64;
            total += l * share;
            let upstream = dg * share;
            if self.config.loss == LossKind::Sigmoid {
                *bias_grads.entry(s.key.predicate.clone()).or_insert(0.0) += upstream.sum();
            }
            for (name, gw) in session.grad(&upstream)? {
                let acc = &mut grads[&name];
                for (a, v) in acc.iter_mut().zip(gw) {
                    *a += v;
                }
            }
        }
        for (name, g) in grads.iter_mut() {
            let th = &self.theta[name];
            for (gk, &u) in g.iter_mut().zip(th) {
                let w = softplus(u);
                let mut dw = *gk;
                if self.config.l1 > 0.0 {
                    total += self.config.l1 * w;
                    dw += self.config.l1;
                }
                if self.config.l2 > 0.0 {
                    total += self.config.l2 * w * w;
                    dw += 2.0 * self.config.l2 * w;
                }
                *gk = dw * sigmoid(u);
            }
        }
        Ok((total, grads, bias_grads))
    }

    /// One update on `batch`; returns the batch loss before the update.
    pub fn step(&mut self, batch: &Batch) -> Result<f64> {
        let (l, mut grads, mut bias_grads) = self.gradient(batch)?;
        if let Some(c) = self.config.clip {
            let norm = grads
                .values()
                .flatten()
                .chain(bias_grads.values())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if norm > c {
                let s = c / norm;
                grads.values_mut().flatten().for_each(|g| *g *= s);
                bias_grads.values_mut().for_each(|g| *g *= s);
            }
        }
        let rate = self.config.rate;
        let adagrad = self.config.optimizer == OptimizerKind::Adagrad;
        let scale = |g: f64, acc: &mut f64| {
            if adagrad {
                *acc += g * g;
                rate * g / (acc.sqrt() + 1e-10)
            } else {
                rate * g
            }
        };
        for (name, g) in &grads {
            let acc = &mut self.accum[name];
            let mut moved = Vec::new();
            for (k, (&gk, a)) in g.iter().zip(acc.iter_mut()).enumerate() {
                let d = scale(gk, a);
                if d != 0.0 {
                    self.theta[name][k] -= d;
                    moved.push(k);
                }
            }
            for k in moved {
                self.write_weight(name, k);
            }
        }
        for (p, g) in bias_grads {
            let a = self.bias_accum.entry(p.clone()).or_insert(0.0);
            let d = scale(g, a);
            *self.bias.get_mut(&p).expect("bias per set") -= d;
        }
        Ok(l)
    }

    /// One pass over shuffled minibatches; returns the mean batch loss.
    pub fn epoch(&mut self) -> Result<f64> {
        let batches = self.batches();
        let mut total = 0.0;
        for b in &batches {
            total += self.step(b)?;
        }
        Ok(total / batches.len().max(1) as f64)
    }

    /// Runs the configured number of epochs and returns the loss history.
    pub fn train(&mut self) -> Result<Vec<f64>> {
        (0..self.config.epochs).map(|_| self.epoch()).collect()
    }
}

/// Convenience wrapper: compiles, trains, and returns the trained
/// program with its loss history.
pub fn train(
    program: Program,
    max_depth: Option<usize>,
    sets: &[ExampleSet],
    config: TrainingConfig,
) -> Result<(Program, Vec<f64>)> {
    let registry = Registry::new(&program, max_depth)?;
    let mut trainer = Trainer::new(program, registry, sets, config)?;
    let history = trainer.train()?;
    Ok((trainer.into_parts().0, history))
}

/// Index of the largest entry, lowest index on ties; `None` when the row
/// is all zeros.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in row.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Fraction of examples whose top answer is one of their targets.
pub fn evaluate_accuracy(program: &Program, registry: &mut Registry, sets: &[ExampleSet]) -> Result<f64> {
    let encoded = encode(program, registry, sets)?;
    let total: usize = encoded.iter().map(EncodedSet::len).sum();
    if total == 0 {
        return Err(Error::Config("no evaluation examples".into()));
    }
    let mut correct = 0;
    for s in &encoded {
        let all: Vec<usize> = (0..s.len()).collect();
        for chunk in all.chunks(256) {
            let (x, t) = s.rows(chunk, program);
            let g = eval(registry, program.kg(), &s.key, &x)?;
            for (row, target) in g.rows().into_iter().zip(t.rows()) {
                if argmax(row).is_some_and(|j| target[j] > 0.0) {
                    correct += 1;
                }
            }
        }
    }
    Ok(correct as f64 / total as f64)
}
