//! Compilation of theories into operator sequences.
//!
//! Each clause gets a factor graph over its body variables. Belief
//! propagation on that tree is unrolled into straight-line code by asking
//! for the message from the root variable. Clauses for the same
//! predicate are summed, and calls to other rule predicates become calls
//! to their compiled functions one level deeper.

mod graph;
mod ir;

use std::collections::HashMap;
use std::sync::Arc;

pub use graph::{build_factor_graph, influence_graph, is_polytree, Factor, FactorGraph, InfluenceGraph};
pub use ir::{CompiledFunction, FnKey, Instr, Matrix, Op, Reg, Sequence, Space};

use crate::error::{Error, Result};
use crate::kgstore::Signature;
use crate::lang::{Direction, Mode};
use crate::program::Program;

/// Compiles single clauses and single functions for one program.
pub struct Compiler<'p> {
    program: &'p Program,
    max_depth: usize,
}

impl<'p> Compiler<'p> {
    /// `max_depth` defaults to the program's call height; recursive
    /// programs must give one.
    pub fn new(program: &'p Program, max_depth: Option<usize>) -> Result<Self> {
        let max_depth = resolve_depth(program, max_depth)?;
        Ok(Compiler { program, max_depth })
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// The unoptimized sequence for one clause, at call depth `depth`.
    pub fn compile_clause(&self, clause: usize, direction: Direction, depth: usize) -> Result<Sequence> {
        let c = self.program.clause(clause);
        let sig = self
            .program
            .signature(&c.head.predicate)
            .expect("rule heads are typed");
        let mut seq = Sequence::new(input_space(sig, direction)?);
        seq.output = self.emit_clause(&mut seq, clause, direction, depth, "")?;
        Ok(seq)
    }

    /// The function for `key` with Calls left unresolved.
    pub fn compile_function(&self, key: &FnKey) -> Result<CompiledFunction> {
        let program = self.program;
        let p = key.predicate.as_str();
        let sig = program
            .signature(p)
            .ok_or_else(|| Error::UndefinedPredicate(p.to_string()))?;
        let mut seq = Sequence::new(input_space(sig, key.direction)?);
        let out_space = output_space(sig, key.direction);
        let rules = program.rule_indices(p);
        let mut parts = Vec::new();
        if let Some(id) = program.kg().relation_id(p) {
            let rel = program.kg().relation(id);
            if !rel.is_empty() || rules.is_empty() {
                let name = rel.name().to_string();
                let r = match key.direction {
                    Direction::InOut | Direction::OutIn => seq.push(
                        Op::MatVec {
                            src: 0,
                            matrix: Matrix::Rel { id, name },
                            transpose: key.direction == Direction::OutIn,
                        },
                        out_space,
                        "facts".into(),
                    ),
                    Direction::Out => {
                        let load = seq.push(Op::UnaryLoad { id, name }, out_space, "v_facts".into());
                        let scale = seq.push(
                            Op::MatVec {
                                src: 0,
                                matrix: Matrix::Any,
                                transpose: false,
                            },
                            out_space,
                            "v0_facts".into(),
                        );
                        seq.push(Op::Hadamard { args: vec![load, scale] }, out_space, "facts".into())
                    }
                    Direction::In => {
                        let in_space = seq.input_space();
                        let load = seq.push(Op::UnaryLoad { id, name }, in_space, "v_facts".into());
                        let both = seq.push(Op::Hadamard { args: vec![0, load] }, in_space, "v_facts'".into());
                        seq.push(
                            Op::MatVec {
                                src: both,
                                matrix: Matrix::Any,
                                transpose: false,
                            },
                            Space::Unit,
                            "facts".into(),
                        )
                    }
                };
                parts.push(r);
            }
        }
        for (k, &ci) in rules.iter().enumerate() {
            let label = if rules.len() + parts.len() > 1 {
                format!("r{}.", k + 1)
            } else {
                String::new()
            };
            parts.push(self.emit_clause(&mut seq, ci, key.direction, key.depth, &label)?);
        }
        seq.output = match parts.as_slice() {
            [] => seq.push(Op::Zero, out_space, "zeros".into()),
            [one] => *one,
            _ => seq.push(Op::ClauseSum { args: parts }, out_space, "sum".into()),
        };
        Ok(CompiledFunction {
            key: key.clone(),
            seq,
        })
    }

    fn emit_clause(
        &self,
        seq: &mut Sequence,
        clause: usize,
        direction: Direction,
        depth: usize,
        label: &str,
    ) -> Result<Reg> {
        let c = self.program.clause(clause);
        let fg = build_factor_graph(c, direction)?;
        let mut e = Emitter {
            compiler: self,
            fg: &fg,
            clause,
            depth,
            label,
            seq,
        };
        match direction {
            Direction::In => {
                let root = fg.input.expect("mode i binds the head argument");
                let v = e.msg_from_var(root, None, None)?;
                let name = format!("{label}v_out");
                Ok(e.seq.push(
                    Op::MatVec {
                        src: v,
                        matrix: Matrix::Any,
                        transpose: false,
                    },
                    Space::Unit,
                    name,
                ))
            }
            Direction::Out => {
                // The unit input reaches the output through an any factor.
                let root = fg.root();
                let space = e.space(root);
                let name = format!("{label}v0,{}", fg.variables[root]);
                let scale = e.seq.push(
                    Op::MatVec {
                        src: 0,
                        matrix: Matrix::Any,
                        transpose: false,
                    },
                    space,
                    name,
                );
                e.msg_from_var(root, None, Some(scale))
            }
            Direction::InOut | Direction::OutIn => e.msg_from_var(fg.root(), None, None),
        }
    }
}

struct Emitter<'a, 'p> {
    compiler: &'a Compiler<'p>,
    fg: &'a FactorGraph,
    clause: usize,
    depth: usize,
    label: &'a str,
    seq: &'a mut Sequence,
}

impl Emitter<'_, '_> {
    fn space(&self, var: usize) -> Space {
        Space::Domain(
            self.compiler
                .program
                .var_type(self.clause, &self.fg.variables[var]),
        )
    }

    /// The message from variable `x` to factor `exclude` (or to the
    /// fictional output literal when `exclude` is `None`).
    fn msg_from_var(&mut self, x: usize, exclude: Option<usize>, extra: Option<Reg>) -> Result<Reg> {
        let mut args = Vec::new();
        let is_input = Some(x) == self.fg.input;
        if is_input {
            args.push(0);
        }
        let neighbors: Vec<usize> = self.fg.neighbors(x).filter(|&f| Some(f) != exclude).collect();
        for f in neighbors {
            args.push(self.msg_to_var(f, x)?);
        }
        args.extend(extra);
        if is_input && args.len() == 1 {
            return Ok(0);
        }
        let space = self.space(x);
        let name = format!("{}v{}", self.label, self.fg.variables[x]);
        let op = if args.is_empty() {
            Op::Ones
        } else {
            Op::Hadamard { args }
        };
        Ok(self.seq.push(op, space, name))
    }

    /// The message from factor `f` to its variable `x`.
    fn msg_to_var(&mut self, f: usize, x: usize) -> Result<Reg> {
        let factor = &self.fg.factors[f];
        let space = self.space(x);
        let name = format!("{}v{},{}", self.label, factor.index, self.fg.variables[x]);
        let program = self.compiler.program;
        let Some(pred) = factor.predicate.clone() else {
            let other = factor.vars[0] + factor.vars[1] - x;
            let src = self.msg_from_var(other, Some(f), None)?;
            return Ok(self.seq.push(
                Op::MatVec {
                    src,
                    matrix: Matrix::Any,
                    transpose: false,
                },
                space,
                name,
            ));
        };
        let is_rule = program.is_rule_predicate(&pred);
        let rel = program.kg().relation_id(&pred);
        if !is_rule && rel.is_none() {
            return Err(Error::UndefinedPredicate(pred));
        }
        let (depth, max_depth) = (self.depth + 1, self.compiler.max_depth);
        let call = |direction: Direction, src: Option<Reg>| {
            let callee = FnKey {
                predicate: pred.clone(),
                direction,
                depth,
            };
            if depth < max_depth {
                Op::Call { callee, src }
            } else {
                Op::Zero
            }
        };
        let op = match factor.vars[..] {
            [_] if is_rule => call(Direction::Out, None),
            [_] => Op::UnaryLoad {
                id: rel.expect("checked"),
                name: pred.clone(),
            },
            [a, b] => {
                let (other, forward) = if b == x { (a, true) } else { (b, false) };
                let src = self.msg_from_var(other, Some(f), None)?;
                if is_rule {
                    call(
                        if forward {
                            Direction::InOut
                        } else {
                            Direction::OutIn
                        },
                        Some(src),
                    )
                } else {
                    Op::MatVec {
                        src,
                        matrix: Matrix::Rel {
                            id: rel.expect("checked"),
                            name: pred.clone(),
                        },
                        transpose: !forward,
                    }
                }
            }
            _ => unreachable!("validated arity"),
        };
        Ok(self.seq.push(op, space, name))
    }
}

fn input_space(sig: Signature, direction: Direction) -> Result<Space> {
    if sig.arity() != direction.arity() {
        return Err(Error::BadMode(format!(
            "mode {} needs arity {}, predicate has arity {}",
            direction.as_str(),
            direction.arity(),
            sig.arity()
        )));
    }
    Ok(direction
        .input_position()
        .map_or(Space::Unit, |p| Space::Domain(sig.arg(p))))
}

fn output_space(sig: Signature, direction: Direction) -> Space {
    direction
        .output_position()
        .map_or(Space::Unit, |p| Space::Domain(sig.arg(p)))
}

fn resolve_depth(program: &Program, max_depth: Option<usize>) -> Result<usize> {
    match max_depth.or_else(|| program.default_depth()) {
        Some(0) => Err(Error::Config("max depth must be at least 1".into())),
        Some(d) => Ok(d),
        None => Err(Error::Config(
            "the theory is recursive; give an explicit max depth".into(),
        )),
    }
}

/// Rewrites every product with an `any` message into a row-sum scaling,
/// so the all-ones matrix is never applied, then drops dead code.
pub fn optimize(seq: &Sequence) -> Sequence {
    let is_any = |r: Reg| match &seq.instrs[r].op {
        Op::MatVec {
            src,
            matrix: Matrix::Any,
            ..
        } if seq.instrs[r].space != Space::Unit => Some(*src),
        _ => None,
    };
    let mut out = Sequence::new(seq.input_space());
    let mut remap = vec![0; seq.len()];
    for (r, instr) in seq.instrs.iter().enumerate().skip(1) {
        if let Op::Hadamard { args } = &instr.op {
            let anys: Vec<Reg> = args.iter().filter_map(|&a| is_any(a)).collect();
            if !anys.is_empty() {
                let rest: Vec<Reg> = args
                    .iter()
                    .filter(|&&a| is_any(a).is_none())
                    .map(|&a| remap[a])
                    .collect();
                let mut base = match rest.as_slice() {
                    [] => out.push(Op::Ones, instr.space, format!("{}'", instr.name)),
                    [one] => *one,
                    _ => out.push(Op::Hadamard { args: rest }, instr.space, format!("{}'", instr.name)),
                };
                for (k, &src) in anys.iter().enumerate() {
                    let name = if k + 1 == anys.len() {
                        instr.name.clone()
                    } else {
                        format!("{}'{}", instr.name, k + 1)
                    };
                    base = out.push(
                        Op::AnyScale {
                            base,
                            norm_of: remap[src],
                        },
                        instr.space,
                        name,
                    );
                }
                remap[r] = base;
                continue;
            }
        }
        let mut op = instr.op.clone();
        op.map_operands(|a| remap[a]);
        remap[r] = out.push(op, instr.space, instr.name.clone());
    }
    out.output = remap[seq.output];
    out.prune();
    out
}

/// Compiled functions keyed by predicate, mode, and depth.
#[derive(Clone, Debug)]
pub struct Registry {
    max_depth: usize,
    optimize: bool,
    functions: HashMap<FnKey, Arc<CompiledFunction>>,
}

impl Registry {
    pub fn new(program: &Program, max_depth: Option<usize>) -> Result<Registry> {
        Ok(Registry {
            max_depth: resolve_depth(program, max_depth)?,
            optimize: true,
            functions: HashMap::new(),
        })
    }

    /// Turns the `any` rewrite off, for differential testing.
    pub fn without_optimization(mut self) -> Registry {
        self.optimize = false;
        self
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Compiles `mode` at depth 0 and everything it calls. Requesting a
    /// function twice returns the same shared object.
    pub fn compile(&mut self, program: &Program, mode: &Mode) -> Result<Arc<CompiledFunction>> {
        let compiler = Compiler {
            program,
            max_depth: self.max_depth,
        };
        let root = FnKey::new(mode, 0);
        let mut pending = vec![root.clone()];
        while let Some(key) = pending.pop() {
            if self.functions.contains_key(&key) {
                continue;
            }
            let mut f = compiler.compile_function(&key)?;
            if self.optimize {
                f.seq = optimize(&f.seq);
            } else {
                f.seq.prune();
            }
            pending.extend(f.dependencies());
            self.functions.insert(key, Arc::new(f));
        }
        Ok(self.functions[&root].clone())
    }

    pub fn get(&self, key: &FnKey) -> Option<&Arc<CompiledFunction>> {
        self.functions.get(key)
    }

    /// All compiled functions, sorted by key.
    pub fn functions(&self) -> Vec<&Arc<CompiledFunction>> {
        let mut all: Vec<_> = self.functions.values().collect();
        all.sort_by(|a, b| a.key.cmp(&b.key));
        all
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Compiles `mode` into a fresh registry.
pub fn compile_predicate(
    program: &Program,
    mode: &Mode,
    max_depth: Option<usize>,
) -> Result<(Registry, Arc<CompiledFunction>)> {
    let mut registry = Registry::new(program, max_depth)?;
    let f = registry.compile(program, mode)?;
    Ok((registry, f))
}
