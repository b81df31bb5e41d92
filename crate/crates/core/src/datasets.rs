//! Generators for the benchmark tasks. Each returns source texts that go
//! through the same parsers as hand-written files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kgstore::KnowledgeGraph;
use crate::lang::{parse_examples, parse_rules, ExampleSet};
use crate::program::Program;

/// Generated task files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rules: String,
    pub facts: String,
    pub types: Option<String>,
    pub train: String,
    pub test: String,
    /// Constants to query, for inference-only tasks.
    pub queries: Vec<String>,
    pub trainable: Vec<String>,
    /// Depth bound the task is meant to run with.
    pub depth: Option<usize>,
}

impl Dataset {
    /// Parses everything and marks the trainable predicates.
    pub fn program(&self) -> Result<Program> {
        let mut kg = KnowledgeGraph::new();
        if let Some(t) = &self.types {
            kg.load_types(t)?;
        }
        kg.load_facts(&self.facts)?;
        for p in &self.trainable {
            kg.set_trainable(p, true)?;
        }
        Program::new(&parse_rules(&self.rules)?, kg)
    }

    pub fn train_sets(&self) -> Result<Vec<ExampleSet>> {
        parse_examples(&self.train)
    }

    pub fn test_sets(&self) -> Result<Vec<ExampleSet>> {
        parse_examples(&self.test)
    }

    /// Writes `rules.txt`, `facts.txt`, and whichever of `types.txt`,
    /// `train.txt`, `test.txt`, `queries.txt` apply.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("rules.txt"), &self.rules)?;
        fs::write(dir.join("facts.txt"), &self.facts)?;
        if let Some(t) = &self.types {
            fs::write(dir.join("types.txt"), t)?;
        }
        if !self.train.is_empty() {
            fs::write(dir.join("train.txt"), &self.train)?;
        }
        if !self.test.is_empty() {
            fs::write(dir.join("test.txt"), &self.test)?;
        }
        if !self.queries.is_empty() {
            fs::write(dir.join("queries.txt"), self.queries.join("\n") + "\n")?;
        }
        Ok(())
    }
}

fn split(lines: Vec<String>, train_fraction: f64, rng: &mut ChaCha8Rng) -> (String, String) {
    let mut lines = lines;
    lines.shuffle(rng);
    let cut = ((lines.len() as f64) * train_fraction).round() as usize;
    let (a, b) = lines.split_at(cut.min(lines.len()));
    let join = |s: &[String]| s.iter().map(|l| format!("{l}\n")).collect::<String>();
    (join(a), join(b))
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::Config(format!("train fraction {f} is outside [0, 1]")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighborhood {
    /// Horizontal and vertical moves.
    Four,
    /// Diagonal moves as well.
    Eight,
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub n: usize,
    pub depth: usize,
    pub init: f64,
    pub neighborhood: Neighborhood,
    /// Adds `edge(c,c)` for every cell.
    pub self_loops: bool,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 16,
            depth: 10,
            init: 0.2,
            neighborhood: Neighborhood::Eight,
            self_loops: true,
            train_fraction: 2.0 / 3.0,
            seed: 0,
        }
    }
}

pub fn cell(i: usize, j: usize) -> String {
    format!("c_{i}_{j}")
}

/// A path-finding grid: every cell's query `path(c,Y)` is labeled with
/// the grid corner nearest to it (all nearest corners on ties).
pub fn gen_grid(spec: &GridSpec) -> Result<Dataset> {
    let n = spec.n;
    if n < 2 || spec.depth < 1 || !(spec.init > 0.0) {
        return Err(Error::Config(
            "grid needs n >= 2, depth >= 1, and a positive initial weight".into(),
        ));
    }
    check_fraction(spec.train_fraction)?;
    let mut facts = String::new();
    let moves: &[(isize, isize)] = match spec.neighborhood {
        Neighborhood::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Neighborhood::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let init = spec.init;
    for i in 0..n {
        for j in 0..n {
            if spec.self_loops {
                writeln!(facts, "edge\t{}\t{}\t{init:?}", cell(i, j), cell(i, j)).unwrap();
            }
            for (di, dj) in moves {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                    writeln!(facts, "edge\t{}\t{}\t{init:?}", cell(i, j), cell(a as usize, b as usize))
                        .unwrap();
                }
            }
        }
    }
    let corners = [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)];
    let mut lines = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = |&(a, b): &(usize, usize)| {
                let (x, y) = (i.abs_diff(a), j.abs_diff(b));
                x * x + y * y
            };
            let best = corners.iter().map(d).min().unwrap();
            let mut line = format!("path({},Y)", cell(i, j));
            for c in corners.iter().filter(|c| d(c) == best) {
                write!(line, "\t{}", cell(c.0, c.1)).unwrap();
            }
            lines.push(line);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (train, test) = split(lines, spec.train_fraction, &mut rng);
    Ok(Dataset {
        rules: "path(X,Y) :- edge(X,Y).\npath(X,Y) :- edge(X,Z), path(Z,Y).\n".into(),
        facts,
        types: None,
        train,
        test,
        queries: Vec::new(),
        trainable: vec!["edge".into()],
        depth: Some(spec.depth),
    })
}

#[derive(Clone, Debug)]
pub struct SmokersSpec {
    pub nodes: usize,
    /// Links each new person adds under preferential attachment.
    pub links: usize,
    /// Chance that a person has a `stress` fact.
    pub stress_fraction: f64,
    pub depth: usize,
    pub seed: u64,
}

impl Default for SmokersSpec {
    fn default() -> Self {
        SmokersSpec {
            nodes: 3327,
            links: 2,
            stress_fraction: 0.3,
            depth: 3,
            seed: 0,
        }
    }
}

pub const SMOKERS_RULES: &str =
    "smokes(X) :- stress(X).\nsmokes(X) :- influences(X,Y), smokes(Y).\n";

/// A social graph grown by preferential attachment. Each link is stored
/// in both directions as an `influences` fact with a random weight.
pub fn gen_smokers(spec: &SmokersSpec) -> Result<Dataset> {
    if spec.nodes == 0 || spec.depth == 0 {
        return Err(Error::Config("smokers needs at least one node and depth >= 1".into()));
    }
    check_fraction(spec.stress_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let person = |i: usize| format!("p{i}");
    let mut facts = String::new();
    // Every endpoint of every link, so sampling from it is degree-biased.
    let mut ends: Vec<usize> = Vec::new();
    for v in 0..spec.nodes {
        let mut chosen: Vec<usize> = Vec::new();
        let want = spec.links.min(v);
        while chosen.len() < want {
            let u = if ends.is_empty() {
                rng.random_range(0..v)
            } else {
                *ends.choose(&mut rng).expect("nonempty")
            };
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        for u in chosen {
            for (a, b) in [(v, u), (u, v)] {
                let w: f64 = rng.random_range(0.05..0.5);
                writeln!(facts, "influences\t{}\t{}\t{w:?}", person(a), person(b)).unwrap();
            }
            ends.push(u);
            ends.push(v);
        }
    }
    for v in 0..spec.nodes {
        if rng.random_bool(spec.stress_fraction) || spec.nodes == 1 {
            let w: f64 = rng.random_range(0.1..1.0);
            writeln!(facts, "stress\t{}\t{w:?}", person(v)).unwrap();
        }
    }
    let types = "stress\tperson\ninfluences\tperson\tperson\n".to_string();
    Ok(Dataset {
        rules: SMOKERS_RULES.into(),
        facts,
        types: Some(types),
        queries: (0..spec.nodes).map(person).collect(),
        depth: Some(spec.depth),
        ..Default::default()
    })
}

#[derive(Clone, Debug)]
pub struct SynthQaSpec {
    pub relations: usize,
    pub entities: usize,
    pub questions: usize,
    /// Distinctive words per question template.
    pub template_words: usize,
    /// Size of the pool of words shared by all templates.
    pub common_words: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthQaSpec {
    fn default() -> Self {
        SynthQaSpec {
            relations: 4,
            entities: 200,
            questions: 2000,
            template_words: 3,
            common_words: 20,
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

pub fn question_type_predicate(relation: usize, direction: usize) -> String {
    format!("indicatesQuestionType_rel{relation}_{direction}")
}

/// A synthetic question-answering task over a random knowledge base.
///
/// Entities are split into subjects and objects; each relation maps
/// every subject to one object. A question names one entity and asks
/// along one relation in one direction. Its words are two distinctive
/// words of that (relation, direction) template plus two common words.
pub fn gen_synth_qa(spec: &SynthQaSpec) -> Result<Dataset> {
    if spec.relations == 0 || spec.entities < 2 || spec.questions == 0 || spec.template_words < 2
    {
        return Err(Error::Config(
            "synthetic QA needs relations, two or more entities, questions, and two template words"
                .into(),
        ));
    }
    check_fraction(spec.train_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subjects = spec.entities / 2;
    let objects = spec.entities - subjects;
    let entity = |i: usize| format!("e{i}");
    let rel = |r: usize| format!("rel{r}");

    let mut facts = String::new();
    let mut types = String::new();
    // maps[r][s] = object of subject s under relation r.
    let mut maps = vec![vec![0usize; subjects]; spec.relations];
    for (r, map) in maps.iter_mut().enumerate() {
        writeln!(types, "{}\tentity\tentity", rel(r)).unwrap();
        for (s, o) in map.iter_mut().enumerate() {
            *o = subjects + rng.random_range(0..objects);
            writeln!(facts, "{}\t{}\t{}", rel(r), entity(s), entity(*o)).unwrap();
        }
    }
    writeln!(types, "mentionsEntity\tquestion\tentity").unwrap();
    writeln!(types, "hasFeature\tquestion\tword").unwrap();

    let template = |r: usize, d: usize, k: usize| format!("w_rel{r}_{d}_{k}");
    let common = |k: usize| format!("w_common{k}");
    let mut words: Vec<String> = Vec::new();
    for r in 0..spec.relations {
        for d in 1..=2 {
            for k in 0..spec.template_words {
                words.push(template(r, d, k));
            }
        }
    }
    words.extend((0..spec.common_words).map(common));

    let mut rules = String::new();
    let mut trainable = Vec::new();
    for r in 0..spec.relations {
        let (p1, p2) = (question_type_predicate(r, 1), question_type_predicate(r, 2));
        writeln!(
            rules,
            "answer(Q,M) :- mentionsEntity(Q,E), {}(M,E), hasFeature(Q,W), {p1}(W).",
            rel(r)
        )
        .unwrap();
        writeln!(
            rules,
            "answer(Q,E) :- mentionsEntity(Q,M), {}(M,E), hasFeature(Q,W), {p2}(W).",
            rel(r)
        )
        .unwrap();
        for p in [p1, p2] {
            writeln!(types, "{p}\tword").unwrap();
            for w in &words {
                writeln!(facts, "{p}\t{w}\t1.0").unwrap();
            }
            trainable.push(p);
        }
    }

    let mut lines = Vec::with_capacity(spec.questions);
    for q in 0..spec.questions {
        let question = format!("q{q}");
        let r = rng.random_range(0..spec.relations);
        let d = rng.random_range(1..=2);
        let s = rng.random_range(0..subjects);
        let (mention, answers): (usize, Vec<usize>) = if d == 1 {
            // Which subjects have this object?
            let o = maps[r][s];
            let subs = (0..subjects).filter(|&t| maps[r][t] == o).collect();
            (o, subs)
        } else {
            (s, vec![maps[r][s]])
        };
        writeln!(facts, "mentionsEntity\t{question}\t{}", entity(mention)).unwrap();
        let mut picks: Vec<usize> = (0..spec.template_words).collect();
        picks.shuffle(&mut rng);
        for &k in &picks[..2] {
            writeln!(facts, "hasFeature\t{question}\t{}", template(r, d, k)).unwrap();
        }
        if spec.common_words > 0 {
            let mut pool: Vec<usize> = (0..spec.common_words).collect();
            pool.shuffle(&mut rng);
            for &k in pool.iter().take(2) {
                writeln!(facts, "hasFeature\t{question}\t{}", common(k)).unwrap();
            }
        }
        let mut line = format!("answer({question},Y)");
        for a in answers {
            write!(line, "\t{}", entity(a)).unwrap();
        }
        lines.push(line);
    }
    let (train, test) = split(lines, spec.train_fraction, &mut rng);
    Ok(Dataset {
        rules,
        facts,
        types: Some(types),
        train,
        test,
        queries: Vec::new(),
        trainable,
        depth: None,
    })
}
