use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kglog::compiler::{build_factor_graph, Registry, Space};
use kglog::datasets::{
    gen_grid, gen_smokers, gen_synth_qa, Dataset, GridSpec, Neighborhood, SmokersSpec, SynthQaSpec,
};
use kglog::experiment::run_experiment;
use kglog::learner::{evaluate_accuracy, LossKind, OptimizerKind, Trainer, TrainingConfig};
use kglog::oracle::{prove, ProofLimits};
use kglog::runtime::eval_ids;
use kglog::{parse_examples, parse_rules, Direction, KnowledgeGraph, Literal, Mode, Program, Term};

#[derive(Parser)]
#[command(
    name = "kglog",
    version,
    about = "Compile, query, and train probabilistic rules over a weighted knowledge graph",
    long_about = "Compile, query, and train probabilistic rules over a weighted knowledge graph.\n\n\
        All tabular output is UTF-8 and tab-separated, one record per line, without a header. \
        Each subcommand's help lists its columns."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProgramArgs {
    /// Rule file
    #[arg(long)]
    rules: PathBuf,
    /// Fact file: `pred<TAB>a[<TAB>b][<TAB>weight]` per line
    #[arg(long)]
    facts: Option<PathBuf>,
    /// Type declarations: `pred<TAB>type[<TAB>type]` per line
    #[arg(long)]
    types: Option<PathBuf>,
    /// Maximum call depth; defaults to one more than the call height of
    /// a non-recursive theory
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    program: ProgramArgs,
    /// Predicate and direction, such as `uncle/io` or `smokes/i`
    #[arg(long)]
    mode: String,
    /// Answers printed per query
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Bound input constants, one query each (none for `p/o`)
    constants: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Softmax,
    Sigmoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adagrad,
}

#[derive(Clone, Copy, ValueEnum)]
enum NeighborhoodArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Subcommand)]
enum Command {
    /// Print the compiled functions for a mode.
    ///
    /// Output is the readable operation listing of every function the
    /// mode needs, callees included, or Graphviz factor graphs with --dot.
    Compile {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        mode: String,
        /// Print the factor graph of each clause in DOT format instead
        #[arg(long)]
        dot: bool,
        /// Keep explicit `any` products instead of rewriting them
        #[arg(long)]
        no_optimize: bool,
    },
    /// Answer queries with the compiled functions.
    ///
    /// Columns: query, answer, score, probability. The probability is the
    /// score over the query's total; `-` when a mode has no answer column.
    /// Queries without answers print nothing and a warning on stderr.
    Query(QueryArgs),
    /// Answer queries by enumerating proofs, with the same columns as `query`.
    Oracle {
        #[command(flatten)]
        query: QueryArgs,
        /// Resolution steps allowed per query
        #[arg(long, default_value_t = 10_000_000)]
        budget: usize,
    },
    /// Train the weights of selected predicates.
    ///
    /// Columns per epoch: epoch, mean loss, train accuracy, test accuracy
    /// (`-` without --test).
    Train {
        #[command(flatten)]
        program: ProgramArgs,
        /// Training examples
        #[arg(long)]
        train: PathBuf,
        /// Held-out examples
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, value_enum, default_value = "softmax")]
        loss: LossArg,
        #[arg(long, value_enum, default_value = "sgd")]
        optimizer: OptimizerArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated predicates to train
        #[arg(long, value_delimiter = ',')]
        trainable: Vec<String>,
        /// Reset every trainable weight to this value before training
        #[arg(long)]
        init: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        l1: f64,
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        /// Clip the gradient's global norm
        #[arg(long)]
        clip: Option<f64>,
        /// Write the trained facts here
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Report argmax accuracy on an example file.
    ///
    /// Columns: examples, accuracy.
    Eval {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        test: PathBuf,
    },
    /// Write a grid path-finding task.
    ///
    /// Columns: file, path.
    GenGrid {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0.2)]
        init: f64,
        #[arg(long, value_enum, default_value = "8")]
        neighborhood: NeighborhoodArg,
        /// Leave out the edge from each cell to itself
        #[arg(long)]
        no_self_loops: bool,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a smokers-style inference task. Columns: file, path.
    GenSmokers {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3327)]
        nodes: usize,
        /// Friends each new person links to
        #[arg(long, default_value_t = 2)]
        links: usize,
        #[arg(long, default_value_t = 0.3)]
        stress_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic question-answering task. Columns: file, path.
    GenSynthqa {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        relations: usize,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 2000)]
        questions: usize,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate, train, and evaluate a benchmark end to end.
    ///
    /// NAME is grid, smokers, or synthqa; settings are `key=value`.
    /// Columns: metric, value. Timings come last.
    Run {
        name: String,
        settings: Vec<String>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(args: &ProgramArgs, trainable: &[String]) -> Result<Program> {
    let mut kg = KnowledgeGraph::new();
    if let Some(t) = &args.types {
        kg.load_types(&read(t)?)?;
    }
    if let Some(f) = &args.facts {
        kg.load_facts(&read(f)?)?;
    }
    for p in trainable {
        kg.set_trainable(p, true)?;
    }
    Ok(Program::new(&parse_rules(&read(&args.rules)?)?, kg)?)
}

type Row = (String, String, f64, Option<f64>);

fn print_rows(out: &mut impl Write, query: &str, mut answers: Vec<(String, f64)>, unit: bool, k: usize) -> Result<()> {
    answers.retain(|(_, w)| *w > 0.0);
    if answers.is_empty() {
        eprintln!("warning: no answers for {query}");
        return Ok(());
    }
    let total: f64 = answers.iter().map(|(_, w)| w).sum();
    answers.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let rows: Vec<Row> = answers
        .into_iter()
        .take(k)
        .map(|(a, w)| (query.to_string(), a, w, (!unit).then(|| w / total)))
        .collect();
    for (q, a, w, p) in rows {
        match p {
            Some(p) => writeln!(out, "{q}\t{a}\t{w}\t{p}")?,
            None => writeln!(out, "{q}\t{a}\t{w}\t-")?,
        }
    }
    Ok(())
}

fn query_literal(mode: &Mode, c: Option<&str>) -> Literal {
    let y = Term::Var("Y".into());
    let c = || Term::Const(c.expect("checked").to_string());
    let args = match mode.direction {
        Direction::InOut => vec![c(), y],
        Direction::OutIn => vec![y, c()],
        Direction::In => vec![c()],
        Direction::Out => vec![y],
    };
    Literal {
        predicate: mode.predicate.clone(),
        args,
    }
}

fn check_constants(mode: &Mode, constants: &[String]) -> Result<Vec<Option<String>>> {
    match (mode.direction.input_position(), constants.is_empty()) {
        (None, true) => Ok(vec![None]),
        (None, false) => bail!("mode {}/o takes no input constants", mode.predicate),
        (Some(_), true) => bail!("give at least one input constant"),
        (Some(_), false) => Ok(constants.iter().cloned().map(Some).collect()),
    }
}

fn query(q: &QueryArgs) -> Result<()> {
    let program = load(&q.program, &[])?;
    let mode = Mode::parse(&q.mode)?;
    let inputs = check_constants(&mode, &q.constants)?;
    let mut registry = Registry::new(&program, q.program.depth)?;
    let f = registry.compile(&program, &mode)?;
    let kg = program.kg();
    let ids: Vec<usize> = match f.input_space() {
        Space::Unit => vec![0],
        Space::Domain(t) => inputs
            .iter()
            .map(|c| kg.constant(c.as_deref().expect("bound"), t))
            .collect::<kglog::Result<_>>()?,
    };
    let scores = eval_ids(&registry, kg, &f.key, &ids, 256)?;
    let mut out = io::stdout().lock();
    for (input, row) in inputs.iter().zip(scores.rows()) {
        let label = query_literal(&mode, input.as_deref()).to_string();
        let answers: Vec<(String, f64)> = match f.output_space() {
            Space::Unit => vec![("true".into(), row[0])],
            Space::Domain(t) => kg
                .symbols()
                .names(t)
                .iter()
                .cloned()
                .zip(row.iter().copied())
                .collect(),
        };
        print_rows(&mut out, &label, answers, f.output_space() == Space::Unit, q.top_k)?;
    }
    Ok(())
}

fn oracle(q: &QueryArgs, budget: usize) -> Result<()> {
    let program = load(&q.program, &[])?;
    let mode = Mode::parse(&q.mode)?;
    let inputs = check_constants(&mode, &q.constants)?;
    let limits = ProofLimits {
        max_depth: q.program.depth,
        budget,
    };
    let mut out = io::stdout().lock();
    for input in &inputs {
        let lit = query_literal(&mode, input.as_deref());
        let table = prove(&program, &lit, limits)?;
        let unit = mode.direction.output_position().is_none();
        let answers: Vec<(String, f64)> = table
            .answers
            .iter()
            .map(|(k, w)| (k.first().cloned().unwrap_or_else(|| "true".into()), *w))
            .collect();
        print_rows(&mut out, &lit.to_string(), answers, unit, q.top_k)?;
    }
    Ok(())
}

fn write_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    data.write_to(dir)?;
    let mut out = io::stdout().lock();
    for name in ["rules.txt", "facts.txt", "types.txt", "train.txt", "test.txt", "queries.txt"] {
        let path = dir.join(name);
        if path.exists() {
            writeln!(out, "{}\t{}", name.trim_end_matches(".txt"), path.display())?;
        }
    }
    Ok(())
}

fn fmt_acc(acc: Option<f64>) -> String {
    acc.map_or("-".into(), |a| format!("{a:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compile {
            program: args,
            mode,
            dot,
            no_optimize,
        } => {
            let program = load(&args, &[])?;
            let mode = Mode::parse(&mode)?;
            let mut out = io::stdout().lock();
            if dot {
                for &ci in program.rule_indices(&mode.predicate) {
                    let graph = build_factor_graph(program.clause(ci), mode.direction)?;
                    write!(out, "{}", graph.to_dot(&format!("{}_{}", mode.predicate, ci)))?;
                }
                return Ok(());
            }
            let mut registry = Registry::new(&program, args.depth)?;
            if no_optimize {
                registry = registry.without_optimization();
            }
            registry.compile(&program, &mode)?;
            for f in registry.functions() {
                writeln!(out, "{f}")?;
            }
        }
        Command::Query(q) => query(&q)?,
        Command::Oracle { query: q, budget } => oracle(&q, budget)?,
        Command::Train {
            program: args,
            train,
            test,
            epochs,
            rate,
            batch,
            loss,
            optimizer,
            seed,
            trainable,
            init,
            l1,
            l2,
            clip,
            save,
        } => {
            let mut program = load(&args, &trainable)?;
            if let Some(w) = init {
                if w.is_nan() || w <= 0.0 {
                    bail!("--init must be positive");
                }
                for p in &trainable {
                    let id = program.kg().relation_id(p).context("trainable predicate")?;
                    program.kg_mut().relation_mut(id).weights_mut().fill(w);
                }
            }
            let train_sets = parse_examples(&read(&train)?)?;
            let test_sets = match &test {
                Some(t) => Some(parse_examples(&read(t)?)?),
                None => None,
            };
            let config = TrainingConfig {
                epochs,
                rate,
                batch_size: batch,
                loss: match loss {
                    LossArg::Softmax => LossKind::SoftmaxCrossEntropy,
                    LossArg::Sigmoid => LossKind::Sigmoid,
                },
                optimizer: match optimizer {
                    OptimizerArg::Sgd => OptimizerKind::Sgd,
                    OptimizerArg::Adagrad => OptimizerKind::Adagrad,
                },
                seed,
                l1,
                l2,
                clip,
            };
            let registry = Registry::new(&program, args.depth)?;
            let mut trainer = Trainer::new(program, registry, &train_sets, config)?;
            let mut out = io::stdout().lock();
            for e in 1..=epochs {
                let loss = trainer.epoch()?;
                let mut registry = trainer.registry().clone();
                let train_acc = evaluate_accuracy(trainer.program(), &mut registry, &train_sets)?;
                let test_acc = match &test_sets {
                    Some(s) => Some(evaluate_accuracy(trainer.program(), &mut registry, s)?),
                    None => None,
                };
                writeln!(out, "{e}\t{loss:.6}\t{}\t{}", fmt_acc(Some(train_acc)), fmt_acc(test_acc))?;
                out.flush()?;
            }
            if let Some(path) = save {
                fs::write(&path, trainer.program().kg().write_facts())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Eval { program: args, test } => {
            let program = load(&args, &[])?;
            let sets = parse_examples(&read(&test)?)?;
            let mut registry = Registry::new(&program, args.depth)?;
            let acc = evaluate_accuracy(&program, &mut registry, &sets)?;
            let n: usize = sets.iter().map(|s| s.len()).sum();
            println!("{n}\t{acc:.4}");
        }
        Command::GenGrid {
            out,
            n,
            depth,
            init,
            neighborhood,
            no_self_loops,
            train_fraction,
            seed,
        } => {
            let spec = GridSpec {
                n,
                depth,
                init,
                neighborhood: match neighborhood {
                    NeighborhoodArg::Four => Neighborhood::Four,
                    NeighborhoodArg::Eight => Neighborhood::Eight,
                },
                self_loops: !no_self_loops,
                train_fraction,
                seed,
            };
            write_dataset(&gen_grid(&spec)?, &out)?;
        }
        Command::GenSmokers {
            out,
            nodes,
            links,
            stress_fraction,
            seed,
        } => {
            let spec = SmokersSpec {
                nodes,
                links,
                stress_fraction,
                seed,
                ..Default::default()
            };
            write_dataset(&gen_smokers(&spec)?, &out)?;
        }
        Command::GenSynthqa {
            out,
            relations,
            entities,
            questions,
            train_fraction,
            seed,
        } => {
            let spec = SynthQaSpec {
                relations,
                entities,
                questions,
                train_fraction,
                seed,
                ..Default::default()
            };
            write_dataset(&gen_synth_qa(&spec)?, &out)?;
        }
        Command::Run { .. } => unreachable!("handled in main"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Run { name, settings } = &cli.command {
        let mut pairs = Vec::new();
        for s in settings {
            let Some((k, v)) = s.split_once('=') else {
                eprintln!("error: setting `{s}` is not key=value");
                return ExitCode::from(2);
            };
            pairs.push((k.to_string(), v.to_string()));
        }
        return match run_experiment(name, &pairs) {
            Ok(report) => {
                print!("{report}");
                ExitCode::SUCCESS
            }
            Err(e @ kglog::Error::Config(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
