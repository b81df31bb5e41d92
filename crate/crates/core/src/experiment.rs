//! End-to-end runs of the benchmark tasks with tab-separated reports.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::compiler::Registry;
use crate::datasets::{gen_grid, gen_smokers, gen_synth_qa, GridSpec, Neighborhood, SmokersSpec, SynthQaSpec};
use crate::error::{Error, Result};
use crate::learner::{evaluate_accuracy, LossKind, OptimizerKind, Trainer, TrainingConfig};
use crate::lang::Mode;
use crate::runtime::eval_ids;

/// Metrics are deterministic given the seed; timings are not.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub metrics: Vec<(String, String)>,
    pub timings: Vec<(String, f64)>,
}

impl Report {
    fn metric(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metrics.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.metrics {
            writeln!(f, "{k}\t{v}")?;
        }
        for (k, v) in &self.timings {
            writeln!(f, "{k}\t{v:.3}")?;
        }
        Ok(())
    }
}

/// `key=value` settings; every key must be consumed.
struct Overrides(HashMap<String, String>);

impl Overrides {
    fn parse(pairs: &[(String, String)]) -> Overrides {
        Overrides(pairs.iter().cloned().collect())
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.0.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for {key}"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(k) => Err(Error::Config(format!("unknown setting `{k}`"))),
            None => Ok(()),
        }
    }
}

fn training(o: &mut Overrides, defaults: TrainingConfig) -> Result<TrainingConfig> {
    let optimizer = match o.take("optimizer", String::new())?.as_str() {
        "" => defaults.optimizer,
        "sgd" => OptimizerKind::Sgd,
        "adagrad" => OptimizerKind::Adagrad,
        other => return Err(Error::Config(format!("unknown optimizer `{other}`"))),
    };
    let loss = match o.take("loss", String::new())?.as_str() {
        "" => defaults.loss,
        "softmax" => LossKind::SoftmaxCrossEntropy,
        "sigmoid" => LossKind::Sigmoid,
        other => return Err(Error::Config(format!("unknown loss `{other}`"))),
    };
    Ok(TrainingConfig {
        epochs: o.take("epochs", defaults.epochs)?,
        rate: o.take("rate", defaults.rate)?,
        batch_size: o.take("batch", defaults.batch_size)?,
        seed: o.take("seed", defaults.seed)?,
        optimizer,
        loss,
        ..defaults
    })
}

/// Training settings that work well for the grid task.
pub fn grid_training() -> TrainingConfig {
    TrainingConfig {
        epochs: 30,
        rate: 0.5,
        batch_size: 20,
        ..Default::default()
    }
}

/// Training settings that work well for the synthetic QA task.
pub fn synth_qa_training() -> TrainingConfig {
    TrainingConfig {
        epochs: 10,
        rate: 1.0,
        batch_size: 50,
        ..Default::default()
    }
}

/// Runs `grid`, `smokers`, or `synthqa` with `key=value` overrides.
pub fn run_experiment(name: &str, overrides: &[(String, String)]) -> Result<Report> {
    let mut o = Overrides::parse(overrides);
    let report = match name {
        "grid" => {
            let d = GridSpec::default();
            let neighborhood = match o.take("neighborhood", 8usize)? {
                4 => Neighborhood::Four,
                8 => Neighborhood::Eight,
                k => return Err(Error::Config(format!("neighborhood must be 4 or 8, got {k}"))),
            };
            let spec = GridSpec {
                n: o.take("n", d.n)?,
                depth: o.take("depth", d.depth)?,
                init: o.take("init", d.init)?,
                neighborhood,
                self_loops: o.take("self_loops", d.self_loops)?,
                train_fraction: o.take("train_fraction", d.train_fraction)?,
                seed: o.take("seed", d.seed)?,
            };
            let config = training(&mut o, TrainingConfig { seed: spec.seed, ..grid_training() })?;
            o.finish()?;
            let data = gen_grid(&spec)?;
            train_and_report(&data, config)?
        }
        "synthqa" => {
            let d = SynthQaSpec::default();
            let spec = SynthQaSpec {
                relations: o.take("relations", d.relations)?,
                entities: o.take("entities", d.entities)?,
                questions: o.take("questions", d.questions)?,
                template_words: o.take("template_words", d.template_words)?,
                common_words: o.take("common_words", d.common_words)?,
                train_fraction: o.take("train_fraction", d.train_fraction)?,
                seed: o.take("seed", d.seed)?,
            };
            let config = training(&mut o, TrainingConfig { seed: spec.seed, ..synth_qa_training() })?;
            o.finish()?;
            let data = gen_synth_qa(&spec)?;
            train_and_report(&data, config)?
        }
        "smokers" => {
            let d = SmokersSpec::default();
            let spec = SmokersSpec {
                nodes: o.take("nodes", d.nodes)?,
                links: o.take("links", d.links)?,
                stress_fraction: o.take("stress_fraction", d.stress_fraction)?,
                depth: o.take("depth", d.depth)?,
                seed: o.take("seed", d.seed)?,
            };
            let chunk = o.take("batch", 512usize)?;
            o.finish()?;
            let data = gen_smokers(&spec)?;
            let start = Instant::now();
            let program = data.program()?;
            let mut registry = Registry::new(&program, data.depth)?;
            let f = registry.compile(&program, &Mode::parse("smokes/i")?)?;
            let compiled = start.elapsed().as_secs_f64();
            let kg = program.kg();
            let person = kg.type_id("person")?;
            let ids: Vec<usize> = data
                .queries
                .iter()
                .map(|c| kg.constant(c, person))
                .collect::<Result<_>>()?;
            let t = Instant::now();
            let scores = eval_ids(&registry, kg, &f.key, &ids, chunk)?;
            let inference = t.elapsed().as_secs_f64();
            let mut r = Report::default();
            r.metric("nodes", spec.nodes);
            r.metric("facts", kg.fact_count());
            r.metric("queries", ids.len());
            r.metric("nonzero_answers", scores.iter().filter(|&&x| x > 0.0).count());
            r.metric("mean_score", format!("{:.6}", scores.mean().unwrap_or(0.0)));
            r.timings.push(("load_compile_seconds".into(), compiled));
            r.timings.push(("inference_seconds".into(), inference));
            r
        }
        other => {
            return Err(Error::Config(format!(
                "unknown experiment `{other}`; expected grid, smokers, or synthqa"
            )))
        }
    };
    Ok(report)
}

fn train_and_report(data: &crate::datasets::Dataset, config: TrainingConfig) -> Result<Report> {
    let mut r = Report::default();
    let start = Instant::now();
    let program = data.program()?;
    let registry = Registry::new(&program, data.depth)?;
    let train = data.train_sets()?;
    let test = data.test_sets()?;
    r.metric("train_examples", train.iter().map(|s| s.len()).sum::<usize>());
    r.metric("test_examples", test.iter().map(|s| s.len()).sum::<usize>());
    let mut trainer = Trainer::new(program, registry, &train, config)?;
    let history = trainer.train()?;
    for (e, l) in history.iter().enumerate() {
        r.metric(format!("loss_epoch_{}", e + 1), format!("{l:.6}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let (program, mut registry) = trainer.into_parts();
    let train_acc = evaluate_accuracy(&program, &mut registry, &train)?;
    r.metric("train_accuracy", format!("{train_acc:.4}"));
    if !test.is_empty() {
        let acc = evaluate_accuracy(&program, &mut registry, &test)?;
        r.metric("test_accuracy", format!("{acc:.4}"));
    }
    r.timings.push(("train_seconds".into(), elapsed));
    Ok(r)
}
