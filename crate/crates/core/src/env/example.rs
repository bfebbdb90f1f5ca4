use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{answer_match, execute, Date, Grammar, Kind, Literal, Program, Scope, Table};

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub question: String,
    pub table_ref: String,
    pub answer: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pos_tags: Vec<String>,
}

/// A literal found in the question, with its token span.
#[derive(Clone, Debug, PartialEq)]
pub struct Mention {
    pub literal: Literal,
    pub start: usize,
    pub end: usize,
}

/// A question/answer pair with its extracted literal pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub question: String,
    pub question_tokens: Vec<String>,
    pub pos_tags: Vec<String>,
    pub table_ref: String,
    pub answer: Vec<String>,
    pub literal_pool: Vec<Literal>,
    pub mentions: Vec<Mention>,
}

impl Example {
    pub fn from_record(record: ExampleRecord, table: &Table) -> Example {
        let question_tokens = tokenize_question(&record.question);
        let mentions = extract_literals(&question_tokens, table);
        let mut literal_pool: Vec<Literal> = Vec::new();
        for m in &mentions {
            if !literal_pool.contains(&m.literal) {
                literal_pool.push(m.literal.clone());
            }
        }
        Example {
            id: record.id,
            question: record.question,
            question_tokens,
            pos_tags: record.pos_tags,
            table_ref: record.table_ref,
            answer: record.answer,
            literal_pool,
            mentions,
        }
    }

    pub fn record(&self) -> ExampleRecord {
        ExampleRecord {
            id: self.id.clone(),
            question: self.question.clone(),
            table_ref: self.table_ref.clone(),
            answer: self.answer.clone(),
            pos_tags: self.pos_tags.clone(),
        }
    }
}

/// Lowercased word tokens; punctuation other than word-internal `'`, `-`,
/// `.` is dropped.
pub fn tokenize_question(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let word: String = raw
            .trim_matches(|c: char| !c.is_alphanumeric())
            .chars()
            .filter(|c| c.is_alphanumeric() || matches!(c, '\'' | '-' | '.'))
            .collect::<String>()
            .to_lowercase();
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

const MAX_MENTION_WORDS: usize = 8;

/// Longest-match string literals against table cells, then numbers and
/// dates parsed from the remaining words. Deterministic given question and
/// table.
pub fn extract_literals(words: &[String], table: &Table) -> Vec<Mention> {
    let mut cells: HashSet<Vec<String>> = HashSet::new();
    for (ci, col) in table.columns().iter().enumerate() {
        if col.kind != Kind::String {
            continue;
        }
        for r in 0..table.n_rows() {
            if let Some(c) = table.cell(r, ci) {
                let toks = tokenize_question(&c.to_string());
                if !toks.is_empty() && toks.len() <= MAX_MENTION_WORDS {
                    cells.insert(toks);
                }
            }
        }
    }
    let has_dates = table.columns().iter().any(|c| c.kind == Kind::Date);
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let longest = (1..=MAX_MENTION_WORDS.min(words.len() - i))
            .rev()
            .find(|&n| cells.contains(&words[i..i + n]));
        if let Some(n) = longest {
            mentions.push(Mention {
                literal: Literal::String(Arc::from(words[i..i + n].join(" ").as_str())),
                start: i,
                end: i + n,
            });
            i += n;
            continue;
        }
        let w = &words[i];
        if let Some(d) = Date::parse(w) {
            mentions.push(Mention {
                literal: Literal::Date(d),
                start: i,
                end: i + 1,
            });
        } else if let Some(x) = parse_number(w) {
            mentions.push(Mention {
                literal: Literal::Number(x),
                start: i,
                end: i + 1,
            });
            if has_dates && x.fract() == 0.0 && (1000.0..=2100.0).contains(&x) {
                mentions.push(Mention {
                    literal: Literal::Date(Date::new(Some(x as i32), None, None).expect("year is set")),
                    start: i,
                    end: i + 1,
                });
            }
        }
        i += 1;
    }
    mentions
}

fn parse_number(w: &str) -> Option<f64> {
    let w = w.replace(',', "");
    if !w.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-') {
        return None;
    }
    w.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Precomputed lexical cues used by the policy's feature templates.
#[derive(Clone, Debug, Default)]
pub struct Cues {
    /// Sorted, so feature order is stable.
    pub words: BTreeSet<String>,
    /// Per column: number of column-name words that appear in the question.
    pub column_overlap: Vec<u32>,
    /// Per column: question words immediately before a mention of the
    /// column name.
    pub column_prev_words: Vec<Vec<String>>,
    /// Question word immediately before each literal mention.
    pub literal_prev_word: HashMap<Literal, String>,
    /// Pruning-table words and POS tags present in the question.
    pub triggers: Vec<String>,
}

impl Cues {
    pub fn new(example: &Example, table: &Table) -> Cues {
        let q: Vec<String> = example.question_tokens.iter().map(|w| stem(w)).collect();
        let words: BTreeSet<String> = q.iter().cloned().collect();
        let mut column_overlap = Vec::new();
        let mut column_prev_words = Vec::new();
        for col in table.columns() {
            let name: Vec<String> = tokenize_question(&col.name.replace('_', " ")).iter().map(|w| stem(w)).collect();
            let mut overlap = 0;
            let mut prev = Vec::new();
            for w in &name {
                if words.contains(w) {
                    overlap += 1;
                }
            }
            for (i, w) in q.iter().enumerate() {
                if name.first() == Some(w) {
                    let p = prev_word(&q, i);
                    if !prev.contains(&p) {
                        prev.push(p);
                    }
                }
            }
            column_overlap.push(overlap);
            column_prev_words.push(prev);
        }
        let mut literal_prev_word = HashMap::new();
        for m in &example.mentions {
            let p = prev_word(&q, m.start);
            literal_prev_word.entry(m.literal.clone()).or_insert(p);
        }
        Cues {
            triggers: crate::memory::rules::present_triggers(&example.question_tokens, &example.pos_tags),
            words,
            column_overlap,
            column_prev_words,
            literal_prev_word,
        }
    }
}

/// Crude plural folding so "players" meets a `player` column.
fn stem(w: &str) -> String {
    if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w.to_string()
    }
}

fn prev_word(q: &[String], i: usize) -> String {
    if i == 0 {
        return "<s>".to_string();
    }
    let p = &q[i - 1];
    if parse_number(p).is_some() {
        "<num>".to_string()
    } else {
        p.clone()
    }
}

/// An example bound to its table and program space: the unit every
/// sampler, estimator and explorer works on.
#[derive(Debug)]
pub struct Context {
    pub example: Example,
    pub table: Arc<Table>,
    pub grammar: Arc<Grammar>,
    pub cues: Cues,
}

impl Context {
    pub fn new(example: Example, table: Arc<Table>, grammar: Arc<Grammar>) -> Context {
        let cues = Cues::new(&example, &table);
        Context {
            example,
            table,
            grammar,
            cues,
        }
    }

    /// Builds a context straight from a record, extracting literals.
    pub fn from_record(record: ExampleRecord, table: Arc<Table>, grammar: Arc<Grammar>) -> Context {
        let example = Example::from_record(record, &table);
        Context::new(example, table, grammar)
    }

    pub fn id(&self) -> &str {
        &self.example.id
    }

    pub fn scope(&self) -> Scope<'_> {
        Scope {
            table: &self.table,
            literals: &self.example.literal_pool,
            grammar: &self.grammar,
        }
    }

    /// Binary reward: 1 iff executing the program yields the gold answer.
    pub fn reward(&self, program: &Program) -> f64 {
        reward(program, &self.example, &self.table)
    }

    /// Same context with a different table, e.g. a perturbed copy.
    pub fn with_table(&self, table: Arc<Table>) -> Context {
        Context::new(self.example.clone(), table, self.grammar.clone())
    }
}

pub fn reward(program: &Program, example: &Example, table: &Table) -> f64 {
    if answer_match(&execute(program, table), &example.answer) {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{olympics_context, olympics_table};

    #[test]
    fn question_tokens_drop_punctuation() {
        assert_eq!(
            tokenize_question("Where did the last 1st place finish occur?"),
            vec!["where", "did", "the", "last", "1st", "place", "finish", "occur"]
        );
        assert_eq!(tokenize_question("(Los Angeles), 2.5!"), vec!["los", "angeles", "2.5"]);
    }

    #[test]
    fn literals_from_olympics_question() {
        let ctx = olympics_context();
        assert_eq!(ctx.example.literal_pool, vec![Literal::String("1st".into())]);
        assert_eq!(ctx.cues.literal_prev_word[&Literal::String("1st".into())], "last");
    }

    #[test]
    fn longest_match_and_numbers() {
        let t = olympics_table();
        let words = tokenize_question("was the 400m run in 2003 faster than relay at 46.7");
        let m = extract_literals(&words, &t);
        let lits: Vec<Literal> = m.into_iter().map(|m| m.literal).collect();
        assert_eq!(
            lits,
            vec![
                Literal::String("400m".into()),
                Literal::Number(2003.0),
                Literal::String("relay".into()),
                Literal::Number(46.7)
            ]
        );
    }

    #[test]
    fn rewards() {
        let ctx = olympics_context();
        let gold = Program::parse("(filter_in all_rows ['1st'] r.position-str) (last v0) (hop v1 r.venue-str) <EOS>")
            .unwrap();
        assert_eq!(ctx.reward(&gold), 1.0);
        assert_eq!(ctx.reward(&Program::parse("(count all_rows) <EOS>").unwrap()), 0.0);
        let err = Program::parse("(filter_in all_rows ['zzz'] r.position-str) (first v0) <EOS>").unwrap();
        assert_eq!(ctx.reward(&err), 0.0);
    }

    #[test]
    fn column_overlap_counts_name_words() {
        let t = olympics_table();
        let rec = ExampleRecord {
            id: "q".into(),
            question: "which venue had the best time".into(),
            table_ref: "olympics".into(),
            answer: vec![],
            pos_tags: vec![],
        };
        let ctx = Context::from_record(rec, Arc::new(t), Arc::new(Grammar::default()));
        assert_eq!(ctx.cues.column_overlap, vec![0, 1, 0, 0, 1]);
        assert_eq!(ctx.cues.column_prev_words[1], vec!["which".to_string()]);
    }
}
