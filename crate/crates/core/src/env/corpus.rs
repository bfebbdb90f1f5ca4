use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::EnvError;
use super::example::{Context, ExampleRecord};
use crate::dsl::answer::denotation_strings;
use crate::dsl::{execute, Cell, Column, Grammar, Kind, Program, Table};

/// Question families of the toy corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Superlative,
    Difference,
    BeforeAfter,
    CompareCount,
    Exclusion,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Superlative,
        Category::Difference,
        Category::BeforeAfter,
        Category::CompareCount,
        Category::Exclusion,
    ];
}

/// Sidecar line: the hidden program that produced an example's answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub gold_program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// A generated corpus, not yet written to disk.
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub tables: Vec<Table>,
    pub train: Vec<ExampleRecord>,
    pub dev: Vec<ExampleRecord>,
    pub gold: Vec<GoldRecord>,
}

impl ToyCorpus {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-memory contexts for (train, dev), without touching disk.
    pub fn contexts(&self, grammar: &Grammar) -> (Vec<Arc<Context>>, Vec<Arc<Context>>) {
        let grammar = Arc::new(grammar.clone());
        let tables: HashMap<&str, Arc<Table>> = self.tables.iter().map(|t| (t.name(), Arc::new(t.clone()))).collect();
        let build = |recs: &[ExampleRecord]| {
            recs.iter()
                .map(|r| Arc::new(Context::from_record(r.clone(), tables[r.table_ref.as_str()].clone(), grammar.clone())))
                .collect()
        };
        (build(&self.train), build(&self.dev))
    }

    /// Writes `train.jsonl`, `dev.jsonl`, `gold.jsonl` and `tables/*.json`.
    pub fn write(&self, dir: &Path) -> Result<(), EnvError> {
        let tables_dir = dir.join("tables");
        fs::create_dir_all(&tables_dir).map_err(|e| EnvError::io(&tables_dir, e))?;
        for t in &self.tables {
            let path = tables_dir.join(format!("{}.json", t.name()));
            let text = serde_json::to_string_pretty(&t.to_json()).expect("table json") + "\n";
            fs::write(&path, text).map_err(|e| EnvError::io(&path, e))?;
        }
        write_jsonl(&dir.join("train.jsonl"), &self.train)?;
        write_jsonl(&dir.join("dev.jsonl"), &self.dev)?;
        write_jsonl(&dir.join("gold.jsonl"), &self.gold)
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EnvError> {
    let mut text = String::new();
    for it in items {
        text.push_str(&serde_json::to_string(it).expect("record json"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| EnvError::io(path, e))
}

/// Reads a gold sidecar file.
pub fn read_gold(path: &Path) -> Result<Vec<GoldRecord>, EnvError> {
    let text = fs::read_to_string(path).map_err(|e| EnvError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| EnvError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

struct Theme {
    entity: &'static str,
    names: &'static [&'static str],
    group: &'static str,
    places: &'static [&'static str],
    numbers: &'static [&'static str],
    max_value: u32,
}

const PEOPLE: &[&str] = &[
    "Ana Ruiz", "Ben Okafor", "Carla Jensen", "Dmitri Volkov", "Elif Kaya", "Femi Adeyemi", "Grace Liu",
    "Hugo Martin", "Ines Costa", "Jonas Berg", "Kofi Mensah", "Lena Hoffmann", "Marco Rossi", "Nadia Haddad",
    "Omar Farouk", "Priya Nair", "Quinn Walsh", "Rosa Delgado", "Sven Larsen", "Tariq Aziz", "Uma Patel",
    "Victor Hugo Lima", "Wei Zhang", "Yara Santos",
];

const TEAMS: &[&str] = &[
    "Red Foxes", "Blue Herons", "Iron Bears", "Golden Eagles", "Storm Riders", "Night Owls", "River Kings",
    "Stone Lions", "Silver Wolves", "Green Vipers", "Harbor Sharks", "Desert Hawks",
];

const NATIONS: &[&str] = &[
    "Canada", "Brazil", "Kenya", "Norway", "Japan", "Chile", "Egypt", "Poland", "India", "Mexico",
];

const CITIES: &[&str] = &[
    "Lyon", "Osaka", "Denver", "Porto", "Leeds", "Austin", "Turin", "Bergen", "Quito", "Perth",
];

const THEMES: &[Theme] = &[
    Theme {
        entity: "player",
        names: PEOPLE,
        group: "nation",
        places: NATIONS,
        numbers: &["goals", "assists", "games", "cards"],
        max_value: 30,
    },
    Theme {
        entity: "team",
        names: TEAMS,
        group: "city",
        places: CITIES,
        numbers: &["wins", "losses", "titles", "draws"],
        max_value: 40,
    },
    Theme {
        entity: "athlete",
        names: PEOPLE,
        group: "country",
        places: NATIONS,
        numbers: &["medals", "events", "records"],
        max_value: 20,
    },
    Theme {
        entity: "club",
        names: TEAMS,
        group: "hometown",
        places: CITIES,
        numbers: &["points", "trophies", "members"],
        max_value: 60,
    },
    Theme {
        entity: "driver",
        names: PEOPLE,
        group: "country",
        places: NATIONS,
        numbers: &["laps", "podiums", "poles", "crashes"],
        max_value: 50,
    },
];

/// Generates `n_tables` random tables with `n_questions_per_table` templated
/// questions each. The last fifth of the tables (rounded) forms the dev
/// split, so dev questions are always asked about unseen tables.
pub fn make_toy_corpus(seed: u64, n_tables: usize, n_questions_per_table: usize) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dev = (n_tables as f64 * 0.2).round() as usize;
    let mut corpus = ToyCorpus {
        tables: Vec::new(),
        train: Vec::new(),
        dev: Vec::new(),
        gold: Vec::new(),
    };
    for ti in 0..n_tables {
        let theme = &THEMES[rng.gen_range(0..THEMES.len())];
        let table = random_table(&mut rng, theme, format!("toy_{ti:03}"));
        let mut order = Category::ALL.to_vec();
        order.shuffle(&mut rng);
        let mut asked = HashSet::new();
        for qi in 0..n_questions_per_table {
            let mut made = None;
            'search: for attempt in 0..40 {
                let cat = order[(qi + attempt) % order.len()];
                if let Some(q) = instantiate(&mut rng, cat, theme, &table) {
                    if asked.insert(q.question.clone()) {
                        made = Some(q);
                        break 'search;
                    }
                }
            }
            let Some(q) = made else { continue };
            let id = format!("toy_{ti:03}_q{qi}");
            let rec = ExampleRecord {
                id: id.clone(),
                question: q.question,
                table_ref: table.name().to_string(),
                answer: q.answer,
                pos_tags: q.pos_tags,
            };
            corpus.gold.push(GoldRecord {
                id,
                gold_program: q.program.to_string(),
                category: Some(q.category),
            });
            if ti >= n_tables - n_dev {
                corpus.dev.push(rec);
            } else {
                corpus.train.push(rec);
            }
        }
        corpus.tables.push(table);
    }
    corpus
}

fn random_table(rng: &mut ChaCha8Rng, theme: &Theme, name: String) -> Table {
    let n_rows = rng.gen_range(4..=8);
    let n_numbers = rng.gen_range(1..=3).min(theme.numbers.len());
    let mut numbers: Vec<&str> = theme.numbers.to_vec();
    numbers.shuffle(rng);
    numbers.truncate(n_numbers);
    let names: Vec<&str> = theme.names.choose_multiple(rng, n_rows).copied().collect();
    let places: Vec<&str> = theme.places.choose_multiple(rng, 3).copied().collect();

    let mut columns = vec![
        Column::new(theme.entity, theme.entity, Kind::String),
        Column::new(theme.group, theme.group, Kind::String),
    ];
    columns.extend(numbers.iter().map(|n| Column::new(*n, *n, Kind::Number)));
    let mut rows = Vec::with_capacity(n_rows);
    for (r, name) in names.iter().enumerate() {
        // The first two rows take distinct places so every table has at
        // least two groups.
        let place = if r < 2 { places[r] } else { places[rng.gen_range(0..places.len())] };
        let mut row = vec![Some(Cell::String(name.to_string())), Some(Cell::String(place.to_string()))];
        for _ in &numbers {
            row.push(Some(Cell::Number(rng.gen_range(0..=theme.max_value) as f64)));
        }
        rows.push(row);
    }
    Table::new(name, columns, rows).expect("generated table is well formed")
}

struct Question {
    question: String,
    pos_tags: Vec<String>,
    program: Program,
    answer: Vec<String>,
    category: Category,
}

fn pos_tag(word: &str) -> &'static str {
    match word {
        "most" | "fewest" | "highest" | "lowest" | "least" => "JJS",
        "more" | "less" | "fewer" => "JJR",
        "which" => "WDT",
        "what" => "WP",
        "how" => "WRB",
        "the" => "DT",
        _ => "NN",
    }
}

fn question(text: String, program: &str, category: Category, table: &Table) -> Option<Question> {
    let program = Program::parse(program).expect("template program parses");
    let answer = denotation_strings(&execute(&program, table))?;
    if answer.is_empty() {
        return None;
    }
    let pos_tags = super::example::tokenize_question(&text).iter().map(|w| pos_tag(w).to_string()).collect();
    Some(Question {
        question: text,
        pos_tags,
        program,
        answer,
        category,
    })
}

fn number_column<'t>(rng: &mut ChaCha8Rng, table: &'t Table) -> (usize, &'t Column) {
    let nums: Vec<usize> = (0..table.columns().len())
        .filter(|&i| table.columns()[i].kind == Kind::Number)
        .collect();
    let i = *nums.choose(rng).expect("tables have a number column");
    (i, &table.columns()[i])
}

fn column_values(table: &Table, col: usize) -> Vec<f64> {
    (0..table.n_rows())
        .filter_map(|r| table.cell(r, col).and_then(Cell::as_number))
        .collect()
}

fn instantiate(rng: &mut ChaCha8Rng, cat: Category, theme: &Theme, table: &Table) -> Option<Question> {
    let e = theme.entity;
    let ent = format!("r.{e}-str");
    match cat {
        Category::Superlative => {
            let (ci, col) = number_column(rng, table);
            let vals = column_values(table, ci);
            let top = rng.gen_bool(0.5);
            let best = if top {
                vals.iter().cloned().fold(f64::MIN, f64::max)
            } else {
                vals.iter().cloned().fold(f64::MAX, f64::min)
            };
            if vals.iter().filter(|&&v| v == best).count() != 1 {
                return None;
            }
            let (func, text) = match (top, rng.gen_bool(0.5)) {
                (true, true) => ("argmax", format!("which {e} had the most {} ?", col.id)),
                (true, false) => ("argmax", format!("which {e} has the highest number of {} ?", col.id)),
                (false, true) => ("argmin", format!("which {e} had the fewest {} ?", col.id)),
                (false, false) => ("argmin", format!("which {e} has the lowest number of {} ?", col.id)),
            };
            let prog = format!("({func} all_rows r.{}-num) (hop v0 {ent}) <EOS>", col.id);
            question(text, &prog, cat, table)
        }
        Category::Difference => {
            let (ci, col) = number_column(rng, table);
            let vals = column_values(table, ci);
            let (first, last) = (vals[0], vals[vals.len() - 1]);
            let text = if first > last && rng.gen_bool(0.5) {
                format!("how many more {} did the first {e} have than the last {e} ?", col.id)
            } else {
                format!("what is the difference in {} between the first and the last {e} ?", col.id)
            };
            let prog = format!("(first all_rows) (last all_rows) (diff v0 v1 r.{}-num) <EOS>", col.id);
            question(text, &prog, cat, table)
        }
        Category::BeforeAfter => {
            let r = rng.gen_range(0..table.n_rows());
            let name = table.cell(r, 0)?.to_string();
            let before = rng.gen_bool(0.5);
            let (func, text) = if before {
                ("previous", format!("which {e} is listed right before {name} ?"))
            } else {
                ("next", format!("which {e} comes right after {name} ?"))
            };
            let lit = name.to_lowercase();
            let prog = format!("(filter_in all_rows ['{lit}'] {ent}) ({func} v0) (hop v1 {ent}) <EOS>");
            question(text, &prog, cat, table)
        }
        Category::CompareCount => {
            let (ci, col) = number_column(rng, table);
            let vals = column_values(table, ci);
            let k = *vals.choose(rng)?;
            let (func, phrase) = *[
                ("filter_>=", "at least"),
                ("filter_>", "more than"),
                ("filter_<", "less than"),
                ("filter_<=", "at most"),
            ]
            .choose(rng)?;
            let text = format!("how many {e}s had {phrase} {k} {} ?", col.id);
            let prog = format!("({func} all_rows [{k}] r.{}-num) (count v0) <EOS>", col.id);
            let q = question(text, &prog, cat, table)?;
            (q.answer != ["0"]).then_some(q)
        }
        Category::Exclusion => {
            let g = theme.group;
            let r = rng.gen_range(0..table.n_rows());
            let place = table.cell(r, 1)?.to_string();
            let text = if rng.gen_bool(0.5) {
                format!("which {e}s are not from {place} ?")
            } else {
                format!("other than those from {place} , which {e}s are listed ?")
            };
            let lit = place.to_lowercase();
            let prog = format!("(filter_!in all_rows ['{lit}'] r.{g}-str) (hop v0 {ent}) <EOS>");
            question(text, &prog, cat, table)
        }
    }
}
