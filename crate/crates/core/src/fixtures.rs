//! Small bundled tables and contexts used by examples, tests and docs.

use std::sync::Arc;

use crate::dsl::{Cell, Column, Grammar, Kind, Table};
use crate::env::{Context, ExampleRecord};

fn s(x: &str) -> Option<Cell> {
    Some(Cell::String(x.to_string()))
}

fn n(x: f64) -> Option<Cell> {
    Some(Cell::Number(x))
}

/// Running results of one athlete: the five-row table behind the question
/// "where did the last 1st place finish occur?" (answer: Thailand).
pub fn olympics_table() -> Table {
    let columns = vec![
        Column::new("year", "Year", Kind::Number),
        Column::new("venue", "Venue", Kind::String),
        Column::new("position", "Position", Kind::String),
        Column::new("event", "Event", Kind::String),
        Column::new("time", "Time", Kind::Number),
    ];
    let rows = vec![
        vec![n(2001.0), s("Hungary"), s("2nd"), s("400m"), n(47.12)],
        vec![n(2003.0), s("Finland"), s("1st"), s("400m"), n(46.69)],
        vec![n(2005.0), s("Germany"), s("11th"), s("400m"), n(46.62)],
        vec![n(2007.0), s("Thailand"), s("1st"), s("relay"), n(182.05)],
        vec![n(2008.0), s("China"), s("7th"), s("relay"), n(180.32)],
    ];
    Table::new("olympics", columns, rows).expect("fixture table is well formed")
}

pub const OLYMPICS_QUESTION: &str = "Where did the last 1st place finish occur?";

/// The olympics question bound to the default program space.
pub fn olympics_context() -> Context {
    let record = ExampleRecord {
        id: "olympics-0".into(),
        question: OLYMPICS_QUESTION.into(),
        table_ref: "olympics".into(),
        answer: vec!["thailand".into()],
        pos_tags: vec![],
    };
    Context::from_record(record, Arc::new(olympics_table()), Arc::new(Grammar::default()))
}

/// A random example over a program space small enough to enumerate, with a
/// random policy. Used by the exact-gradient and variance checks.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub ctx: Arc<Context>,
    pub policy: crate::policy::Policy,
    /// Every program in the space with its reward.
    pub space: Vec<(crate::dsl::Program, f64)>,
    pub max_tokens: usize,
}

impl TinyInstance {
    pub fn rewarded(&self) -> Vec<crate::dsl::Program> {
        self.space.iter().filter(|(_, r)| *r > 0.0).map(|(p, _)| p.clone()).collect()
    }
}

pub const TINY_MAX_TOKENS: usize = 11;

/// Three rows, a name column and two number columns; programs use argmax,
/// argmin, hop, first and last (144 programs). The answer is the
/// denotation of a random program, so at least one program is rewarded.
/// Policy weights are uniform in ±`scale`.
pub fn tiny_instance(seed: u64, scale: f64) -> TinyInstance {
    use crate::dsl::{answer::denotation_strings, execute, Function};
    use crate::policy::{Cursor, FeatureConfig, Policy};
    use rand::seq::SliceRandom;
    use rand::Rng;

    let mut rng = crate::rng::stream_rng(seed, 0);
    let mut names = ["ann", "bob", "cy", "dee", "eli"];
    names.shuffle(&mut rng);
    let mut scores: Vec<u32> = (1..40).collect();
    scores.shuffle(&mut rng);
    let columns = vec![
        Column::new("name", "Name", Kind::String),
        Column::new("score", "Score", Kind::Number),
        Column::new("age", "Age", Kind::Number),
    ];
    let rows = (0..3)
        .map(|i| vec![s(names[i]), n(scores[i] as f64), n(scores[i + 3] as f64 + 10.0)])
        .collect();
    let table = Arc::new(Table::new("tiny", columns, rows).expect("tiny table"));
    let grammar = Arc::new(Grammar::with_functions(
        &[Function::Argmax, Function::Argmin, Function::Hop, Function::First, Function::Last],
        TINY_MAX_TOKENS,
    ));
    let words = ["highest", "lowest", "first", "last", "oldest"];
    let question = format!("who has the {} score", words[rng.gen_range(0..words.len())]);
    let mut record = ExampleRecord {
        id: format!("tiny-{seed}"),
        question,
        table_ref: "tiny".into(),
        answer: vec![],
        pos_tags: vec![],
    };
    let probe = Context::from_record(record.clone(), table.clone(), grammar.clone());
    let space = crate::env::enumerate_programs(&probe, TINY_MAX_TOKENS).expect("tiny space");
    let answers: Vec<Vec<String>> = space
        .iter()
        .filter_map(|(p, _)| denotation_strings(&execute(p, &table)))
        .collect();
    record.answer = answers[rng.gen_range(0..answers.len())].clone();
    let ctx = Arc::new(Context::from_record(record, table, grammar));
    let space = crate::env::enumerate_programs(&ctx, TINY_MAX_TOKENS).expect("tiny space");

    let mut policy = Policy::new(FeatureConfig::default());
    let mut ids = std::collections::BTreeSet::new();
    for (p, _) in &space {
        let mut cur = Cursor::new();
        for t in p.tokens() {
            let step = policy.step(&ctx, &cur).expect("valid prefix");
            ids.extend(step.features.iter().flatten().map(|(id, _)| *id));
            cur.push(t.clone());
        }
    }
    for id in ids {
        policy.set_param(id, rng.gen_range(-scale..=scale));
    }
    TinyInstance {
        ctx,
        policy,
        space,
        max_tokens: TINY_MAX_TOKENS,
    }
}
