use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kglog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kglog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn family(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/family")
        .join(file)
        .display()
        .to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kglog-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn query(cmd: &str, mode: &str, constants: &[&str]) -> String {
    let (rules, facts) = (family("rules.txt"), family("facts.txt"));
    let mut args = vec![cmd, "--rules", &rules, "--facts", &facts, "--mode", mode];
    args.extend_from_slice(constants);
    stdout(&kglog(&args))
}

#[test]
fn query_prints_scores_and_probabilities() {
    let out = query("query", "uncle/io", &["liam", "joe"]);
    assert_eq!(out, "uncle(liam,Y)\tchip\t0.891\t1\nuncle(joe,Y)\tbob\t0.81\t1\n");
    let out = query("query", "uncle/oi", &["chip"]);
    assert_eq!(out, "uncle(Y,chip)\tdave\t0.891\t0.5\nuncle(Y,chip)\tliam\t0.891\t0.5\n");
}

#[test]
fn oracle_agrees_with_query() {
    for (mode, c) in [("uncle/io", "liam"), ("uncle/oi", "bob"), ("status/io", "eve")] {
        assert_eq!(query("query", mode, &[c]), query("oracle", mode, &[c]), "{mode} {c}");
    }
}

#[test]
fn dead_end_queries_warn() {
    let o = kglog(&[
        "query",
        "--rules",
        &family("rules.txt"),
        "--facts",
        &family("facts.txt"),
        "--mode",
        "uncle/io",
        "eve",
    ]);
    assert!(stdout(&o).is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no answers"));
}

#[test]
fn compile_lists_operations_and_dot() {
    let (rules, facts) = (family("rules.txt"), family("facts.txt"));
    let base = ["compile", "--rules", &rules, "--facts", &facts, "--mode", "uncle/io"];
    let ir = stdout(&kglog(&base));
    assert!(ir.contains("u M_child"), "{ir}");
    assert!(ir.contains("return"), "{ir}");
    let mut dot = base.to_vec();
    dot.push("--dot");
    let dot = stdout(&kglog(&dot));
    assert_eq!(dot.matches("graph \"").count(), 2);
}

#[test]
fn errors_exit_nonzero() {
    let o = kglog(&["query", "--rules", &family("rules.txt"), "--mode", "uncle/xx", "a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad mode"));
    let o = kglog(&["run", "nonesuch"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kglog(&["run", "grid", "colour=red"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generators_write_parseable_files() {
    let dir = scratch("grid");
    let d = dir.display().to_string();
    let listing = stdout(&kglog(&[
        "gen-grid", "--out", &d, "--n", "2", "--neighborhood", "4", "--no-self-loops",
    ]));
    assert!(listing.starts_with("rules\t"));
    let facts = std::fs::read_to_string(dir.join("facts.txt")).unwrap();
    assert_eq!(facts.lines().filter(|l| l.starts_with("edge\t")).count(), 8);

    let qa = scratch("qa");
    let q = qa.display().to_string();
    stdout(&kglog(&[
        "gen-synthqa", "--out", &q, "--relations", "2", "--entities", "10", "--questions", "100",
    ]));
    let eval = stdout(&kglog(&[
        "eval",
        "--rules",
        &qa.join("rules.txt").display().to_string(),
        "--facts",
        &qa.join("facts.txt").display().to_string(),
        "--types",
        &qa.join("types.txt").display().to_string(),
        "--test",
        &qa.join("test.txt").display().to_string(),
    ]));
    assert!(eval.starts_with("25\t"), "{eval}");
    let _ = std::fs::remove_dir_all(dir);
    let _ = std::fs::remove_dir_all(qa);
}

#[test]
fn train_reports_each_epoch_and_saves() {
    let dir = scratch("train");
    let d = dir.display().to_string();
    stdout(&kglog(&["gen-grid", "--out", &d, "--n", "6", "--depth", "6"]));
    let path = |f: &str| dir.join(f).display().to_string();
    let saved = path("trained.txt");
    let out = stdout(&kglog(&[
        "train", "--rules", &path("rules.txt"), "--facts", &path("facts.txt"),
        "--train", &path("train.txt"), "--test", &path("test.txt"), "--depth", "6",
        "--trainable", "edge", "--epochs", "3", "--rate", "0.5", "--batch", "5",
        "--save", &saved,
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[0], (i + 1).to_string());
        assert!(cols[1].parse::<f64>().unwrap() > 0.0);
    }
    let trained = std::fs::read_to_string(&saved).unwrap();
    assert!(trained.lines().any(|l| l.starts_with("edge\t") && !l.ends_with("\t0.2")));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn run_is_deterministic() {
    let a = stdout(&kglog(&["run", "grid", "n=5", "depth=5", "epochs=3", "seed=4"]));
    let b = stdout(&kglog(&["run", "grid", "n=5", "depth=5", "epochs=3", "seed=4"]));
    let metrics = |s: &str| s.lines().filter(|l| !l.contains("seconds")).map(String::from).collect::<Vec<_>>();
    assert_eq!(metrics(&a), metrics(&b));
    assert!(a.lines().any(|l| l.starts_with("test_accuracy\t")));
}
