//! The operator IR: straight-line, single-assignment register code.

use std::fmt;

use crate::kgstore::{KnowledgeGraph, RelId, TypeId};
use crate::lang::{Direction, Mode};

/// The vector space a register lives in. `Unit` is one-dimensional and
/// carries the input of queries with no bound argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    Unit,
    Domain(TypeId),
}

impl Space {
    pub fn dim(self, kg: &KnowledgeGraph) -> usize {
        match self {
            Space::Unit => 1,
            Space::Domain(t) => kg.domain_size(t),
        }
    }
}

/// Register index; equal to the position of its defining instruction.
pub type Reg = usize;

/// Identifies one compiled function: predicate, mode, and call depth.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FnKey {
    pub predicate: String,
    pub direction: Direction,
    pub depth: usize,
}

impl FnKey {
    pub fn new(mode: &Mode, depth: usize) -> FnKey {
        FnKey {
            predicate: mode.predicate.clone(),
            direction: mode.direction,
            depth,
        }
    }

    pub fn mode(&self) -> Mode {
        Mode::new(&self.predicate, self.direction)
    }
}

impl fmt::Display for FnKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}@{}",
            self.predicate,
            self.direction.as_str(),
            self.depth
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Rel { id: RelId, name: String },
    /// The all-ones matrix into the instruction's space. Never stored.
    Any,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// The function argument.
    Input,
    /// A unary relation's weight vector, broadcast over the batch.
    UnaryLoad { id: RelId, name: String },
    /// `src · M`, or `src · Mᵀ` when `transpose`.
    MatVec {
        src: Reg,
        matrix: Matrix,
        transpose: bool,
    },
    /// Componentwise product. One operand copies it.
    Hadamard { args: Vec<Reg> },
    /// All ones: the product of zero messages.
    Ones,
    /// `base` with each row scaled by the row sum of `norm_of`.
    AnyScale { base: Reg, norm_of: Reg },
    ClauseSum { args: Vec<Reg> },
    /// Invokes another compiled function. `None` passes a ones column.
    Call { callee: FnKey, src: Option<Reg> },
    /// All zeros: the depth bound cut this call off.
    Zero,
}

impl Op {
    pub fn operands(&self) -> Vec<Reg> {
        match self {
            Op::Input | Op::UnaryLoad { .. } | Op::Ones | Op::Zero => vec![],
            Op::MatVec { src, .. } => vec![*src],
            Op::Hadamard { args } | Op::ClauseSum { args } => args.clone(),
            Op::AnyScale { base, norm_of } => vec![*base, *norm_of],
            Op::Call { src, .. } => src.iter().copied().collect(),
        }
    }

    pub(crate) fn map_operands(&mut self, f: impl Fn(Reg) -> Reg) {
        match self {
            Op::Input | Op::UnaryLoad { .. } | Op::Ones | Op::Zero => {}
            Op::MatVec { src, .. } => *src = f(*src),
            Op::Hadamard { args } | Op::ClauseSum { args } => {
                args.iter_mut().for_each(|a| *a = f(*a))
            }
            Op::AnyScale { base, norm_of } => {
                *base = f(*base);
                *norm_of = f(*norm_of);
            }
            Op::Call { src, .. } => {
                if let Some(s) = src {
                    *s = f(*s)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instr {
    pub op: Op,
    pub space: Space,
    /// Display name such as `v2,W`.
    pub name: String,
}

/// A straight-line program. Register 0 is always the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub instrs: Vec<Instr>,
    pub output: Reg,
}

impl Sequence {
    pub(crate) fn new(input_space: Space) -> Sequence {
        Sequence {
            instrs: vec![Instr {
                op: Op::Input,
                space: input_space,
                name: "u".into(),
            }],
            output: 0,
        }
    }

    pub(crate) fn push(&mut self, op: Op, space: Space, name: String) -> Reg {
        debug_assert!(op.operands().iter().all(|&r| r < self.instrs.len()));
        self.instrs.push(Instr { op, space, name });
        self.instrs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn input_space(&self) -> Space {
        self.instrs[0].space
    }

    pub fn output_space(&self) -> Space {
        self.instrs[self.output].space
    }

    /// Operations besides the input binding.
    pub fn emitted(&self) -> usize {
        self.instrs.len() - 1
    }

    pub fn calls(&self) -> impl Iterator<Item = &FnKey> {
        self.instrs.iter().filter_map(|i| match &i.op {
            Op::Call { callee, .. } => Some(callee),
            _ => None,
        })
    }

    /// Removes instructions that do not reach the output, renumbering
    /// the survivors. The input always stays at register 0.
    pub(crate) fn prune(&mut self) {
        let mut live = vec![false; self.instrs.len()];
        live[0] = true;
        live[self.output] = true;
        for r in (0..self.instrs.len()).rev() {
            if live[r] {
                for a in self.instrs[r].op.operands() {
                    live[a] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.instrs.len()];
        let mut kept = Vec::new();
        for (r, instr) in std::mem::take(&mut self.instrs).into_iter().enumerate() {
            if live[r] {
                remap[r] = kept.len();
                kept.push(instr);
            }
        }
        for instr in &mut kept {
            instr.op.map_operands(|a| remap[a]);
        }
        self.output = remap[self.output];
        self.instrs = kept;
    }

    /// Whether every operand is defined before its use.
    pub fn is_ssa(&self) -> bool {
        self.instrs
            .iter()
            .enumerate()
            .all(|(r, i)| i.op.operands().iter().all(|&a| a < r))
            && matches!(self.instrs.first().map(|i| &i.op), Some(Op::Input))
            && self.output < self.instrs.len()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = |r: Reg| self.instrs[r].name.as_str();
        let join = |args: &[Reg], sep: &str| {
            args.iter().map(|&a| n(a)).collect::<Vec<_>>().join(sep)
        };
        for instr in &self.instrs[1..] {
            let rhs = match &instr.op {
                Op::Input => "input".to_string(),
                Op::UnaryLoad { name, .. } => format!("v_{name}"),
                Op::MatVec {
                    src,
                    matrix,
                    transpose,
                } => {
                    let m = match matrix {
                        Matrix::Rel { name, .. } => name.as_str(),
                        Matrix::Any => "any",
                    };
                    let t = if *transpose { "^T" } else { "" };
                    format!("{} M_{m}{t}", n(*src))
                }
                Op::Hadamard { args } => join(args, " o "),
                Op::Ones => "ones".into(),
                Op::AnyScale { base, norm_of } => format!("{} |{}|_1", n(*base), n(*norm_of)),
                Op::ClauseSum { args } => join(args, " + "),
                Op::Call { callee, src } => {
                    format!("g[{callee}]({})", src.map_or("ones", n))
                }
                Op::Zero => "zeros".into(),
            };
            writeln!(f, "{} = {rhs}", instr.name)?;
        }
        write!(f, "return {}", n(self.output))
    }
}

/// A compiled query response function.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledFunction {
    pub key: FnKey,
    pub seq: Sequence,
}

impl CompiledFunction {
    pub fn input_space(&self) -> Space {
        self.seq.input_space()
    }

    pub fn output_space(&self) -> Space {
        self.seq.output_space()
    }

    pub fn dependencies(&self) -> Vec<FnKey> {
        let mut deps: Vec<FnKey> = self.seq.calls().cloned().collect();
        deps.sort();
        deps.dedup();
        deps
    }
}

impl fmt::Display for CompiledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "g[{}](u):", self.key)?;
        for line in self.seq.to_string().lines() {
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}
