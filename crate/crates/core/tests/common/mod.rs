//! Random polytree theories and small fixtures shared by the integration
//! tests.
#![allow(dead_code)]

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kglog::compiler::{Matrix, Op, Sequence};
use kglog::Program;

pub const BINARY: [&str; 3] = ["e0", "e1", "e2"];
pub const UNARY: [&str; 2] = ["u0", "u1"];

/// Facts from the family example.
pub const FAMILY_FACTS: &str = "child\tliam\teve\t0.99\nchild\tdave\teve\t0.99\nchild\tliam\tbob\t0.75\n\
                                husband\teve\tbob\t0.9\ninfant\tliam\t0.7\ninfant\tdave\t0.1\n\
                                aunt\tjoe\teve\t0.9\nbrother\teve\tchip\t0.9\nparent\tliam\teve\t0.99\n";

pub struct Case {
    pub rules: String,
    pub facts: String,
    pub constants: Vec<String>,
}

impl Case {
    pub fn program(&self) -> Program {
        Program::from_sources(&self.rules, &self.facts, None)
            .unwrap_or_else(|e| panic!("{e}\n{}", self.rules))
    }
}

struct Vars(usize);

impl Vars {
    fn fresh(&mut self) -> String {
        self.0 += 1;
        format!("V{}", self.0)
    }
}

/// A body whose literal graph is a forest of paths: every variable is
/// shared by at most two literals, so the influence graph is a polytree.
fn body(rng: &mut ChaCha8Rng, len: usize, calls: &[(&str, usize)]) -> (Vec<String>, Vec<String>) {
    let mut vars = Vars(0);
    let mut all = Vec::new();
    let mut lits = Vec::new();
    let chains = if len >= 2 && rng.random_bool(0.35) { 2 } else { 1 };
    let first = if chains == 2 { rng.random_range(1..len) } else { len };
    for m in [first, len - first].into_iter().filter(|&m| m > 0) {
        let mut cur = vars.fresh();
        all.push(cur.clone());
        let start_unary = rng.random_bool(0.3);
        let end_unary = m - start_unary as usize >= 2 && rng.random_bool(0.3);
        let pick = |rng: &mut ChaCha8Rng, arity: usize| -> String {
            let own: Vec<&str> = calls.iter().filter(|c| c.1 == arity).map(|c| c.0).collect();
            if !own.is_empty() && rng.random_bool(0.4) {
                own[rng.random_range(0..own.len())].to_string()
            } else if arity == 1 {
                UNARY[rng.random_range(0..UNARY.len())].to_string()
            } else {
                BINARY[rng.random_range(0..BINARY.len())].to_string()
            }
        };
        if start_unary {
            lits.push(format!("{}({cur})", pick(rng, 1)));
        }
        for _ in 0..m - start_unary as usize - end_unary as usize {
            let next = vars.fresh();
            all.push(next.clone());
            let p = pick(rng, 2);
            if rng.random_bool(0.5) {
                lits.push(format!("{p}({cur},{next})"));
            } else {
                lits.push(format!("{p}({next},{cur})"));
            }
            cur = next;
        }
        if end_unary {
            lits.push(format!("{}({cur})", pick(rng, 1)));
        }
    }
    lits.shuffle(rng);
    (lits, all)
}

fn clause(rng: &mut ChaCha8Rng, head: &str, arity: usize, calls: &[(&str, usize)]) -> String {
    loop {
        let len = rng.random_range(1..=4);
        let (lits, mut vars) = body(rng, len, calls);
        if vars.len() < arity {
            continue;
        }
        vars.shuffle(rng);
        let args = vars[..arity].join(",");
        return format!("{head}({args}) :- {}.\n", lits.join(", "));
    }
}

/// A theory of at most three clauses with bodies of at most four
/// literals, over at most `max_constants` constants.
pub fn random_case(seed: u64, max_constants: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rules = String::new();
    match rng.random_range(0..3) {
        0 => {
            for _ in 0..rng.random_range(1..=3) {
                rules += &clause(&mut rng, "p", 2, &[]);
            }
        }
        1 => {
            rules += &clause(&mut rng, "q", 2, &[]);
            for _ in 0..rng.random_range(1..=2) {
                rules += &clause(&mut rng, "p", 2, &[("q", 2)]);
            }
        }
        _ => {
            rules += &clause(&mut rng, "r", 1, &[]);
            for _ in 0..rng.random_range(1..=2) {
                rules += &clause(&mut rng, "p", 2, &[("r", 1)]);
            }
        }
    }
    let n = rng.random_range(3..=max_constants);
    let constants: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let mut facts = String::new();
    let weight = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>();
    for p in BINARY {
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        pairs.shuffle(&mut rng);
        let k = rng.random_range(1..=2 * n);
        for &(i, j) in &pairs[..k] {
            let w = weight(&mut rng);
            writeln!(facts, "{p}\t{}\t{}\t{w:?}", constants[i], constants[j]).unwrap();
        }
    }
    for p in UNARY {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        for &i in &ids[..rng.random_range(1..=n)] {
            let w = weight(&mut rng);
            writeln!(facts, "{p}\t{}\t{w:?}", constants[i]).unwrap();
        }
    }
    Case {
        rules,
        facts,
        constants,
    }
}

/// A register's value as an expression tree, with commutative operands
/// sorted so emission order does not matter.
pub fn canon(seq: &Sequence, r: usize) -> String {
    match &seq.instrs[r].op {
        Op::Input => "u".into(),
        Op::UnaryLoad { name, .. } => format!("v_{name}"),
        Op::MatVec { src, matrix, transpose } => {
            let m = match matrix {
                Matrix::Rel { name, .. } => name.clone(),
                Matrix::Any => "any".into(),
            };
            format!("({} M_{m}{})", canon(seq, *src), if *transpose { "^T" } else { "" })
        }
        Op::Hadamard { args } | Op::ClauseSum { args } => {
            let mut parts: Vec<String> = args.iter().map(|&a| canon(seq, a)).collect();
            parts.sort();
            let sep = if matches!(seq.instrs[r].op, Op::Hadamard { .. }) { " o " } else { " + " };
            format!("[{}]", parts.join(sep))
        }
        Op::Ones => "1".into(),
        Op::Zero => "0".into(),
        Op::AnyScale { base, norm_of } => format!("({} |{}|)", canon(seq, *base), canon(seq, *norm_of)),
        Op::Call { callee, src } => format!("g[{callee}]({})", src.map_or("1".into(), |s| canon(seq, s))),
    }
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
