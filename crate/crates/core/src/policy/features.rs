use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::dsl::{Function, Kind, Literal, Token, VarRef};
use crate::env::Context;

use super::Cursor;

/// Feature templates switched on for a policy. Changing the set changes
/// the meaning of every parameter, so checkpoints record it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub token: bool,
    pub token_prev: bool,
    pub token_trigger: bool,
    pub kind_position: bool,
    pub column_overlap: bool,
    pub bias: bool,
    /// Token x the function of the last finished expression.
    pub token_history: bool,
    /// Function x every question word.
    pub function_word: bool,
    /// Column x the word before its mention, per enclosing function.
    pub column_context: bool,
    /// Literal x the word before its mention, per enclosing function.
    pub literal_context: bool,
    /// Whether a column holds the string literal already chosen.
    pub column_has_literal: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            token: true,
            token_prev: true,
            token_trigger: true,
            kind_position: true,
            column_overlap: true,
            bias: true,
            token_history: true,
            function_word: true,
            column_context: true,
            literal_context: true,
            column_has_literal: true,
        }
    }
}

impl FeatureConfig {
    /// Only the six base templates.
    pub fn minimal() -> FeatureConfig {
        FeatureConfig {
            token_history: false,
            function_word: false,
            column_context: false,
            literal_context: false,
            column_has_literal: false,
            ..FeatureConfig::default()
        }
    }

    /// Stable fingerprint, used to refuse mismatched checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = FnvHasher::default();
        h.write(json.as_bytes());
        h.finish()
    }
}

pub type Features = Vec<(u64, f64)>;

const TOK: u8 = 1;
const TOK_PREV: u8 = 2;
const TOK_TRIGGER: u8 = 3;
const KIND_POS: u8 = 4;
const COL_OVERLAP: u8 = 5;
const COL_OVERLAP_FN: u8 = 6;
const COL_NO_OVERLAP: u8 = 7;
const BIAS: u8 = 8;
const HISTORY: u8 = 9;
const FUNC_WORD: u8 = 10;
const COL_CTX: u8 = 11;
const LIT_CTX: u8 = 12;
const COL_HAS_LIT: u8 = 13;

/// Hashes a template tag and its string parts into a feature id. Parts are
/// fed byte-wise with a separator, so ids are stable across platforms.
pub fn feature_id(template: u8, parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&[template]);
    for p in parts {
        h.write(p.as_bytes());
        h.write(&[0xff]);
    }
    h.finish()
}

/// Id of the (token x trigger) feature, exposed for tests and inspection.
pub fn trigger_feature(token: &Token, trigger: &str) -> u64 {
    feature_id(TOK_TRIGGER, &[abstraction(token, 0), trigger])
}

pub fn overlap_feature() -> u64 {
    feature_id(COL_OVERLAP, &[])
}

pub fn token_prev_feature(token: &Token, prev: Option<&Token>) -> u64 {
    let p = prev.map(|t| abstraction(t, 0)).unwrap_or("<s>");
    feature_id(TOK_PREV, &[abstraction(token, 0), p])
}

/// Table-independent name of a token. Variables are named by recency so
/// the same habit transfers across programs.
pub fn abstraction(t: &Token, n_vars: usize) -> &'static str {
    match t {
        Token::Open => "(",
        Token::Close => ")",
        Token::Func(f) => f.name(),
        Token::Column(c) => match c.kind {
            Kind::Number => "col:num",
            Kind::Date => "col:date",
            Kind::String => "col:str",
        },
        Token::Var(VarRef::AllRows) => "all_rows",
        Token::Var(VarRef::Var(i)) if (*i as usize) + 1 == n_vars => "var:prev",
        Token::Var(_) => "var:older",
        Token::Literal(l) => match l.kind() {
            Kind::Number => "lit:num",
            Kind::Date => "lit:date",
            Kind::String => "lit:str",
        },
        Token::Eos => "<EOS>",
    }
}

fn kind_name(t: &Token) -> &'static str {
    match t {
        Token::Open | Token::Close => "paren",
        Token::Func(_) => "func",
        Token::Column(_) => "column",
        Token::Var(_) => "var",
        Token::Literal(_) => "literal",
        Token::Eos => "eos",
    }
}

fn position_bucket(len: usize) -> &'static str {
    match len {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        4..=5 => "4-5",
        6..=8 => "6-8",
        9..=12 => "9-12",
        13..=17 => "13-17",
        _ => "18+",
    }
}

fn column_holds(ctx: &Context, col: usize, needle: &str) -> bool {
    let needle = needle.to_lowercase();
    (0..ctx.table.n_rows()).any(|r| {
        ctx.table
            .cell(r, col)
            .is_some_and(|c| c.to_string().to_lowercase().contains(&needle))
    })
}

/// Sparse features of choosing `cand` at the cursor's position.
pub fn featurize(config: &FeatureConfig, ctx: &Context, cur: &Cursor, cand: &Token) -> Features {
    let mut out: Features = Vec::with_capacity(16);
    let n_vars = cur.state.var_types().len();
    let abs = abstraction(cand, n_vars);
    let func = cur.state.current_function();
    let func_name = func.map(Function::name).unwrap_or("-");
    let arg_pos = match cur.state.current_args().len() {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        _ => "4+",
    };

    if config.token {
        out.push((feature_id(TOK, &[abs]), 1.0));
    }
    if config.token_prev {
        let prev = cur.prev.as_ref().map(|t| abstraction(t, n_vars)).unwrap_or("<s>");
        out.push((feature_id(TOK_PREV, &[abs, prev]), 1.0));
    }
    if config.token_trigger {
        for t in &ctx.cues.triggers {
            out.push((feature_id(TOK_TRIGGER, &[abs, t]), 1.0));
        }
    }
    if config.kind_position {
        out.push((feature_id(KIND_POS, &[kind_name(cand), position_bucket(cur.state.len())]), 1.0));
    }
    if config.bias {
        out.push((feature_id(BIAS, &[]), 1.0));
    }
    if config.token_history && matches!(cand, Token::Open | Token::Eos | Token::Func(_)) {
        let last = cur.last_func.map(Function::name).unwrap_or("<none>");
        out.push((feature_id(HISTORY, &[abs, last]), 1.0));
    }
    match cand {
        Token::Func(f) if config.function_word => {
            for w in &ctx.cues.words {
                out.push((feature_id(FUNC_WORD, &[f.name(), w]), 1.0));
            }
        }
        Token::Column(c) => {
            if let Some(ci) = ctx.table.column_index(&c.id) {
                let overlap = ctx.cues.column_overlap.get(ci).copied().unwrap_or(0);
                if config.column_overlap {
                    if overlap > 0 {
                        out.push((feature_id(COL_OVERLAP, &[]), overlap as f64));
                        out.push((feature_id(COL_OVERLAP_FN, &[func_name, arg_pos]), overlap as f64));
                    } else {
                        out.push((feature_id(COL_NO_OVERLAP, &[func_name, arg_pos]), 1.0));
                    }
                }
                if config.column_context {
                    for p in &ctx.cues.column_prev_words[ci] {
                        out.push((feature_id(COL_CTX, &[func_name, arg_pos, p]), 1.0));
                    }
                }
                if config.column_has_literal {
                    let lit = cur.state.current_args().iter().find_map(|t| match t {
                        Token::Literal(Literal::String(s)) => Some(s.clone()),
                        _ => None,
                    });
                    if let Some(s) = lit {
                        if c.kind == Kind::String {
                            let yes = if column_holds(ctx, ci, &s) { "yes" } else { "no" };
                            out.push((feature_id(COL_HAS_LIT, &[func_name, yes]), 1.0));
                        }
                    }
                }
            }
        }
        Token::Literal(l) if config.literal_context => {
            if let Some(p) = ctx.cues.literal_prev_word.get(l) {
                out.push((feature_id(LIT_CTX, &[func_name, p]), 1.0));
            }
        }
        _ => {}
    }
    out
}
