mod common;

use kglog::compiler::Registry;
use kglog::learner::{evaluate_accuracy, LossKind, Trainer, TrainingConfig};
use kglog::{parse_examples, Program};

const UNCLE: &str = "uncle(X,Y):-child(X,W),brother(W,Y).\nuncle(X,Y):-aunt(X,W),husband(W,Y).\n";

fn family(trainable: &[&str]) -> Program {
    let mut p = Program::from_sources(UNCLE, common::FAMILY_FACTS, None).unwrap();
    for t in trainable {
        p.kg_mut().set_trainable(t, true).unwrap();
    }
    p
}

fn weights(p: &Program) -> Vec<(String, Vec<f64>)> {
    p.kg()
        .relations()
        .map(|(_, r)| (r.name().to_string(), r.weights().to_vec()))
        .collect()
}

fn trainer(program: Program, examples: &str, config: TrainingConfig) -> Trainer {
    let sets = parse_examples(examples).unwrap();
    let registry = Registry::new(&program, None).unwrap();
    Trainer::new(program, registry, &sets, config).unwrap()
}

#[test]
fn loss_falls_on_the_family_toy() {
    let config = TrainingConfig {
        epochs: 5,
        rate: 0.5,
        ..Default::default()
    };
    let mut t = trainer(
        family(&["child", "brother", "aunt", "husband"]),
        "uncle(liam,Y)\tchip\nuncle(joe,Y)\tbob\n",
        config,
    );
    let history = t.train().unwrap();
    assert!(history.windows(2).all(|w| w[1] < w[0]), "{history:?}");
}

#[test]
fn only_trainable_relations_move() {
    let before = family(&["brother"]);
    let snapshot = weights(&before);
    let mut t = trainer(before, "uncle(liam,Y)\tchip\n", TrainingConfig::default());
    let batch = t.full_batch();
    t.step(&batch).unwrap();
    for ((name, old), (_, new)) in snapshot.iter().zip(weights(t.program())) {
        if name == "brother" {
            assert_ne!(*old, new);
        } else {
            assert_eq!(*old, new, "{name}");
        }
    }
}

#[test]
fn nothing_trainable_is_a_no_op() {
    let program = family(&[]);
    let snapshot = weights(&program);
    let mut t = trainer(program, "uncle(liam,Y)\tchip\n", TrainingConfig { epochs: 3, ..Default::default() });
    t.train().unwrap();
    assert_eq!(snapshot, weights(t.program()));
}

#[test]
fn weights_off_every_proof_path_do_not_move() {
    let mut program = family(&["husband"]);
    program.kg_mut().set_trainable("infant", true).unwrap();
    let snapshot = weights(&program);
    let mut t = trainer(program, "uncle(liam,Y)\tchip\n", TrainingConfig { epochs: 3, ..Default::default() });
    t.train().unwrap();
    // liam has no aunt, so neither husband nor infant is on a proof path.
    assert_eq!(snapshot, weights(t.program()));
}

#[test]
fn fixed_rate_step_is_the_negative_gradient() {
    let rate = 0.3;
    let mut t = trainer(
        family(&["child", "brother"]),
        "uncle(liam,Y)\tchip:0.5\tbob:0.5\n",
        TrainingConfig { rate, ..Default::default() },
    );
    let batch = t.full_batch();
    let before = t.theta().clone();
    let (_, grads, _) = t.gradient(&batch).unwrap();
    t.step(&batch).unwrap();
    for (name, g) in &grads {
        for (k, gk) in g.iter().enumerate() {
            let moved = t.theta()[name][k] - before[name][k];
            assert!((moved + rate * gk).abs() < 1e-15, "{name}[{k}]");
        }
    }
}

#[test]
fn rule_weights_learn_which_clause_is_right() {
    let rules = "p(X,Y) :- good(X,Y) {r_good}.\np(X,Y) :- bad(X,Y) {r_bad}.\n";
    let mut facts = String::new();
    let mut examples = String::new();
    for i in 0..6 {
        facts += &format!("good\ta{i}\tg{i}\nbad\ta{i}\tb{i}\n");
        examples += &format!("p(a{i},Y)\tg{i}\n");
    }
    let program = Program::from_sources(rules, &facts, None).unwrap();
    let mut t = trainer(program, &examples, TrainingConfig { epochs: 150, rate: 1.0, ..Default::default() });
    t.train().unwrap();
    let kg = t.program().kg();
    let w = kg.relation_by_name("weighted").unwrap();
    let ids = kg.symbols().names(w.signature().arg(0));
    let weight = |id: &str| {
        let row = ids.iter().position(|n| n == id).unwrap();
        w.weight(row, 0).unwrap()
    };
    assert!(weight("r_bad") < 0.1 * weight("r_good"), "{} vs {}", weight("r_bad"), weight("r_good"));
    // The data relations were not marked trainable.
    for data in ["good", "bad"] {
        assert!(kg.relation_by_name(data).unwrap().weights().iter().all(|&x| x == 1.0));
    }
}

#[test]
fn sigmoid_loss_trains_too() {
    let config = TrainingConfig {
        epochs: 20,
        rate: 0.5,
        loss: LossKind::Sigmoid,
        ..Default::default()
    };
    let mut t = trainer(family(&["brother", "child"]), "uncle(liam,Y)\tchip\n", config);
    let history = t.train().unwrap();
    assert!(history.last().unwrap() < &history[0]);
    assert!(t.bias("uncle") != 0.0);
}

#[test]
fn accuracy_policy() {
    let program = family(&[]);
    let mut registry = Registry::new(&program, None).unwrap();
    let one = parse_examples("uncle(liam,Y)\tchip\n").unwrap();
    assert_eq!(evaluate_accuracy(&program, &mut registry, &one).unwrap(), 1.0);
    // A query with no answers counts as wrong.
    let mixed = parse_examples("uncle(liam,Y)\tchip\nuncle(eve,Y)\tchip\n").unwrap();
    assert_eq!(evaluate_accuracy(&program, &mut registry, &mixed).unwrap(), 0.5);
}
