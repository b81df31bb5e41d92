use kglog::compiler::{compile_predicate, optimize, Compiler, Matrix, Op, Registry, Sequence};
use kglog::oracle::{prove, ProofLimits};
use kglog::runtime::{eval, input_batch};
use kglog::{Direction, Mode, Program};

const FACTS: &str = "child\tliam\teve\t0.99\nchild\tdave\teve\t0.99\nchild\tliam\tbob\t0.75\n\
                     husband\teve\tbob\t0.9\ninfant\tliam\t0.7\ninfant\tdave\t0.1\n\
                     aunt\tjoe\teve\t0.9\nbrother\teve\tchip\t0.9\nparent\tliam\teve\t0.99\n";

/// A register's value as an expression tree, with commutative operands
/// sorted so emission order does not matter.
fn canon(seq: &Sequence, r: usize) -> String {
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

fn golden_program() -> Program {
    let rules = "uncle(X,Y):-parent(X,W),brother(W,Y).\n\
                 uncle(X,Y):-aunt(X,W),husband(W,Y).\n\
                 status(X,T):-assign_tired(T),parent(X,W),infant(W).\n";
    let facts = format!("{FACTS}assign_tired\ttired\n");
    Program::from_sources(rules, &facts, None).unwrap()
}

fn golden(p: &Program, clause: usize, direction: Direction) -> (String, usize) {
    let s = Compiler::new(p, None).unwrap().compile_clause(clause, direction, 0).unwrap();
    assert!(s.is_ssa());
    (canon(&s, s.output), s.emitted())
}

#[test]
fn golden_sequences() {
    let p = golden_program();
    assert_eq!(
        golden(&p, 0, Direction::InOut),
        ("[([(u M_parent)] M_brother)]".to_string(), 4)
    );
    assert_eq!(
        golden(&p, 1, Direction::InOut),
        ("[([(u M_aunt)] M_husband)]".to_string(), 4)
    );
    assert_eq!(
        golden(&p, 2, Direction::InOut),
        ("[([(u M_parent) o v_infant] M_any) o v_assign_tired]".to_string(), 6)
    );
    // Querying the other way transposes both matrices.
    assert_eq!(
        golden(&p, 0, Direction::OutIn),
        ("[([(u M_brother^T)] M_parent^T)]".to_string(), 4)
    );
}

#[test]
fn golden_register_names() {
    let p = golden_program();
    let s = Compiler::new(&p, None).unwrap().compile_clause(2, Direction::InOut, 0).unwrap();
    let text = s.to_string();
    assert!(text.contains("vW = v2,W o v3,W"), "{text}");
    assert!(text.contains("vT = v1,T o v4,T"), "{text}");
    assert!(text.contains("v4,T = vW M_any"), "{text}");
}

#[test]
fn optimize_removes_any_matrices() {
    let p = golden_program();
    let s = Compiler::new(&p, None).unwrap().compile_clause(2, Direction::InOut, 0).unwrap();
    let o = optimize(&s);
    assert_eq!(canon(&o, o.output), "(v_assign_tired |[(u M_parent) o v_infant]|)");
    assert!(o.instrs.iter().all(|i| !matches!(i.op, Op::MatVec { matrix: Matrix::Any, .. })));
    let r1 = Compiler::new(&p, None).unwrap().compile_clause(0, Direction::InOut, 0).unwrap();
    assert_eq!(optimize(&r1), r1);
}

fn answers(p: &Program, mode: &str, constant: &str) -> Vec<(String, f64)> {
    let mode = Mode::parse(mode).unwrap();
    let (registry, f) = compile_predicate(p, &mode, None).unwrap();
    let kg = p.kg();
    let kglog::compiler::Space::Domain(t) = f.input_space() else { panic!() };
    let kglog::compiler::Space::Domain(out) = f.output_space() else { panic!() };
    let id = kg.constant(constant, t).unwrap();
    let g = eval(&registry, kg, &f.key, &input_batch(f.input_space(), kg, &[id])).unwrap();
    g.row(0)
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(j, w)| (kg.symbols().name(out, j).unwrap().to_string(), *w))
        .collect()
}

#[test]
fn family_example_scores() {
    let rules = "uncle(X,Y):-child(X,W),brother(W,Y).\n\
                 uncle(X,Y):-aunt(X,W),husband(W,Y).\n\
                 status(X,tired):-child(W,X),infant(W).\n";
    let p = Program::from_sources(rules, FACTS, None).unwrap();
    let close = |got: Vec<(String, f64)>, want: &[(&str, f64)]| {
        assert_eq!(got.len(), want.len(), "{got:?}");
        for ((a, x), (b, y)) in got.iter().zip(want) {
            assert_eq!(a, b);
            assert!((x - y).abs() < 1e-12, "{a}: {x} vs {y}");
        }
    };
    close(answers(&p, "uncle/io", "liam"), &[("chip", 0.891)]);
    close(answers(&p, "uncle/io", "joe"), &[("bob", 0.81)]);
    close(answers(&p, "status/io", "eve"), &[("tired", 0.792)]);
}

#[test]
fn multi_clause_functions_sum() {
    let p = golden_program();
    let mode = Mode::parse("uncle/io").unwrap();
    let (_, f) = compile_predicate(&p, &mode, None).unwrap();
    assert_eq!(
        canon(&f.seq, f.seq.output),
        "[[([(u M_aunt)] M_husband)] + [([(u M_parent)] M_brother)]]"
    );
}

#[test]
fn registry_memoizes_and_stays_at_depth_zero() {
    let p = golden_program();
    let mut registry = Registry::new(&p, None).unwrap();
    let mode = Mode::parse("uncle/io").unwrap();
    let a = registry.compile(&p, &mode).unwrap();
    let b = registry.compile(&p, &mode).unwrap();
    assert!(std::sync::Arc::ptr_eq(&a, &b));
    assert!(registry.functions().iter().all(|f| f.key.depth == 0));
}

#[test]
fn recursion_is_cut_at_the_depth_bound() {
    let rules = "path(X,Y):-edge(X,Y).\npath(X,Y):-edge(X,Z),path(Z,Y).";
    let p = Program::from_sources(rules, "edge\ta\tb\nedge\tb\tc\nedge\tc\td\n", None).unwrap();
    let mode = Mode::parse("path/io").unwrap();
    let (registry, f) = compile_predicate(&p, &mode, Some(2)).unwrap();
    assert_eq!(registry.len(), 2);
    for func in registry.functions() {
        assert!(func.dependencies().iter().all(|d| d.depth == func.key.depth + 1 && d.depth < 2));
    }
    let kg = p.kg();
    let a = kg.constant("a", kg.type_id("thing").unwrap()).unwrap();
    let g = eval(&registry, kg, &f.key, &input_batch(f.input_space(), kg, &[a])).unwrap();
    let got: Vec<&str> = g
        .row(0)
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(j, _)| kg.symbols().names(kg.type_id("thing").unwrap())[j].as_str())
        .collect();
    assert_eq!(got, ["b", "c"]);
    let oracle = prove(
        &p,
        &kglog::lang::parse_literal("path(a,Y)").unwrap(),
        ProofLimits { max_depth: Some(2), ..Default::default() },
    )
    .unwrap();
    assert_eq!(oracle.len(), 2);
    assert!(Registry::new(&p, None).is_err());
    assert!(Registry::new(&p, Some(0)).is_err());
}

#[test]
fn compile_errors() {
    let p = Program::from_sources("p(X,Y):-q(X,Y),r(Y,Z),s(Z,X).", "q\ta\tb\n", None).unwrap();
    let err = compile_predicate(&p, &Mode::parse("p/io").unwrap(), None).unwrap_err();
    assert!(matches!(err, kglog::Error::NotPolytree(ref c) if c.contains("p(X,Y)")), "{err}");
    let p = Program::from_sources("p(X,Y):-nothing(X,Y).", "q\ta\tb\n", None).unwrap();
    let err = compile_predicate(&p, &Mode::parse("p/io").unwrap(), None).unwrap_err();
    assert!(matches!(err, kglog::Error::UndefinedPredicate(_)), "{err}");
    let err = compile_predicate(&p, &Mode::parse("zzz/io").unwrap(), None).unwrap_err();
    assert!(matches!(err, kglog::Error::UndefinedPredicate(_)), "{err}");
}
