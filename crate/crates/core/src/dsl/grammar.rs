//! Next-token validity oracle.
//!
//! A [`DecodeState`] summarizes a program prefix: its length, the static
//! types of the variables bound so far, and the partially written
//! expression. [`DecodeState::valid_next`] returns exactly the tokens after
//! which at least one well-typed complete program still fits within the
//! grammar's length cap.

use serde::{Deserialize, Serialize};

use super::table::Table;
use super::token::{ArgSlot, ColumnSlot, Function, Literal, Token, VarRef};
use super::value::Kind;

pub const DEFAULT_MAX_LEN: usize = 25;

/// Static type of a bound variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarType {
    RowList,
    Row,
    Number,
    Cell,
    CellList,
}

impl VarType {
    pub fn is_rows(self) -> bool {
        matches!(self, VarType::Row | VarType::RowList)
    }
}

/// Length cap, function whitelist and expression cap defining a program space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    pub max_len: usize,
    #[serde(with = "function_names")]
    pub functions: Vec<Function>,
    pub max_expressions: usize,
}

impl Default for Grammar {
    fn default() -> Grammar {
        Grammar {
            max_len: DEFAULT_MAX_LEN,
            functions: Function::ALL.to_vec(),
            max_expressions: super::interp::DEFAULT_STEP_BUDGET,
        }
    }
}

impl Grammar {
    /// Same grammar with the length cap lowered to `max_len`.
    pub fn capped(&self, max_len: usize) -> Grammar {
        Grammar {
            max_len: self.max_len.min(max_len),
            ..self.clone()
        }
    }

    pub fn with_functions(functions: &[Function], max_len: usize) -> Grammar {
        Grammar {
            max_len,
            functions: functions.to_vec(),
            ..Grammar::default()
        }
    }

    pub fn allows(&self, f: Function) -> bool {
        self.functions.contains(&f)
    }
}

mod function_names {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::dsl::token::Function;

    pub fn serialize<S: Serializer>(fs: &[Function], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(fs.iter().map(|f| f.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Function>, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .map(|n| Function::from_name(n).ok_or_else(|| D::Error::custom(format!("unknown function `{n}`"))))
            .collect()
    }
}

/// Everything the oracle consults besides the prefix.
#[derive(Clone, Copy)]
pub struct Scope<'a> {
    pub table: &'a Table,
    pub literals: &'a [Literal],
    pub grammar: &'a Grammar,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum ExprState {
    Boundary,
    Opened,
    Call { func: Function, args: Vec<Token> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecodeState {
    len: usize,
    vars: Vec<VarType>,
    expr: ExprState,
    finished: bool,
}

impl Default for DecodeState {
    fn default() -> Self {
        DecodeState::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("token {token} is not valid after a prefix of length {position}")]
pub struct InvalidToken {
    pub position: usize,
    pub token: String,
}

impl DecodeState {
    pub fn new() -> DecodeState {
        DecodeState {
            len: 0,
            vars: Vec::new(),
            expr: ExprState::Boundary,
            finished: false,
        }
    }

    /// Replays a prefix, checking each token against the oracle.
    pub fn from_prefix(scope: &Scope, prefix: &[Token]) -> Result<DecodeState, InvalidToken> {
        let mut s = DecodeState::new();
        for t in prefix {
            s.push_checked(scope, t.clone())?;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn var_types(&self) -> &[VarType] {
        &self.vars
    }

    /// Function of the expression being written, if any.
    pub fn current_function(&self) -> Option<Function> {
        match &self.expr {
            ExprState::Call { func, .. } => Some(*func),
            _ => None,
        }
    }

    /// Arguments written so far in the current expression.
    pub fn current_args(&self) -> &[Token] {
        match &self.expr {
            ExprState::Call { args, .. } => args,
            _ => &[],
        }
    }

    pub fn at_boundary(&self) -> bool {
        self.expr == ExprState::Boundary
    }

    pub fn push_checked(&mut self, scope: &Scope, token: Token) -> Result<(), InvalidToken> {
        if !self.valid_next(scope).contains(&token) {
            return Err(InvalidToken {
                position: self.len,
                token: token.to_string(),
            });
        }
        self.push(token);
        Ok(())
    }

    /// Advances without validation; callers must only push tokens returned
    /// by [`DecodeState::valid_next`].
    pub fn push(&mut self, token: Token) {
        self.len += 1;
        match (&mut self.expr, token) {
            (_, Token::Eos) => self.finished = true,
            (ExprState::Boundary, Token::Open) => self.expr = ExprState::Opened,
            (ExprState::Opened, Token::Func(func)) => {
                self.expr = ExprState::Call {
                    func,
                    args: Vec::with_capacity(func.arity()),
                }
            }
            (ExprState::Call { func, args }, Token::Close) => {
                let ty = result_type(*func, args, &self.vars);
                self.vars.push(ty);
                self.expr = ExprState::Boundary;
            }
            (ExprState::Call { args, .. }, t) => args.push(t),
            (state, t) => debug_assert!(false, "unexpected {t} in {state:?}"),
        }
    }

    pub fn valid_next(&self, scope: &Scope) -> Vec<Token> {
        let mut out = Vec::new();
        self.valid_next_into(scope, &mut out);
        out
    }

    pub fn valid_next_into(&self, scope: &Scope, out: &mut Vec<Token>) {
        out.clear();
        if self.finished || self.len >= scope.grammar.max_len {
            return;
        }
        let remaining = scope.grammar.max_len - self.len;
        match &self.expr {
            ExprState::Boundary => {
                let room = self.vars.len() < scope.grammar.max_expressions
                    && scope
                        .grammar
                        .functions
                        .iter()
                        .any(|&f| f.arity() + 4 <= remaining && self.fillable(scope, f, &[]));
                if room {
                    out.push(Token::Open);
                }
                if !self.vars.is_empty() {
                    out.push(Token::Eos);
                }
            }
            ExprState::Opened => {
                for &f in &scope.grammar.functions {
                    // f, args, close, then EOS
                    if f.arity() + 3 <= remaining && self.fillable(scope, f, &[]) {
                        out.push(Token::Func(f));
                    }
                }
            }
            ExprState::Call { func, args } => {
                let sig = func.signature();
                if args.len() == sig.len() {
                    out.push(Token::Close);
                    return;
                }
                let mut trial = args.clone();
                for cand in self.slot_candidates(scope, sig[args.len()], args) {
                    trial.push(cand.clone());
                    if self.fillable(scope, *func, &trial) {
                        out.push(cand);
                    }
                    trial.pop();
                }
            }
        }
    }

    /// Whether the remaining argument slots of `func` can all be filled.
    fn fillable(&self, scope: &Scope, func: Function, args: &[Token]) -> bool {
        let sig = func.signature();
        sig[args.len()..].iter().all(|&slot| match slot {
            // value still to be chosen; CmpValue candidates already require
            // a column of their kind
            ArgSlot::Column(ColumnSlot::MatchValue) if args.len() < 2 => true,
            _ => !self.slot_candidates(scope, slot, args).is_empty(),
        })
    }

    fn slot_candidates(&self, scope: &Scope, slot: ArgSlot, args: &[Token]) -> Vec<Token> {
        let mut out = Vec::new();
        match slot {
            ArgSlot::Rows | ArgSlot::Row => {
                if slot == ArgSlot::Rows {
                    out.push(Token::Var(VarRef::AllRows));
                }
                for (i, ty) in self.vars.iter().enumerate() {
                    if ty.is_rows() {
                        out.push(Token::var(i as u16));
                    }
                }
            }
            ArgSlot::Column(cs) => {
                let value_kind = args.iter().find_map(|t| match t {
                    Token::Literal(l) => Some(l.kind()),
                    _ => None,
                });
                for c in scope.table.columns() {
                    if cs.admits(c.kind, value_kind) {
                        out.push(Token::column(&c.id, c.kind));
                    }
                }
            }
            ArgSlot::CmpValue => {
                for l in scope.literals {
                    let k = l.kind();
                    if k != Kind::String && scope.table.columns().iter().any(|c| c.kind == k) {
                        push_unique(&mut out, Token::Literal(l.clone()));
                    }
                }
            }
            ArgSlot::StrValue => {
                if scope.table.columns().iter().any(|c| c.kind == Kind::String) {
                    for l in scope.literals {
                        if l.kind() == Kind::String {
                            push_unique(&mut out, Token::Literal(l.clone()));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Completion-count key: two states with equal keys have the same number of
/// completions, because later validity depends on variables only through
/// their types and on arguments only through their kinds.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShapeKey {
    len: usize,
    vars: Vec<VarType>,
    expr: u8,
    func: Option<Function>,
    args: Vec<(u8, Option<VarType>, Option<Kind>)>,
    finished: bool,
}

impl DecodeState {
    pub fn shape_key(&self) -> ShapeKey {
        let (expr, func, args) = match &self.expr {
            ExprState::Boundary => (0, None, Vec::new()),
            ExprState::Opened => (1, None, Vec::new()),
            ExprState::Call { func, args } => {
                let shapes = args
                    .iter()
                    .map(|t| match t {
                        Token::Var(VarRef::AllRows) => (0, Some(VarType::RowList), None),
                        Token::Var(VarRef::Var(i)) => (0, self.vars.get(*i as usize).copied(), None),
                        Token::Column(c) => (1, None, Some(c.kind)),
                        Token::Literal(l) => (2, None, Some(l.kind())),
                        _ => (3, None, None),
                    })
                    .collect();
                (2, Some(*func), shapes)
            }
        };
        ShapeKey {
            len: self.len,
            vars: self.vars.clone(),
            expr,
            func,
            args,
            finished: self.finished,
        }
    }
}

fn push_unique(out: &mut Vec<Token>, t: Token) {
    if !out.contains(&t) {
        out.push(t);
    }
}

fn result_type(func: Function, args: &[Token], vars: &[VarType]) -> VarType {
    match func {
        Function::Hop => match args.first() {
            Some(Token::Var(VarRef::Var(i))) if vars.get(*i as usize) == Some(&VarType::Row) => VarType::Cell,
            _ => VarType::CellList,
        },
        Function::Argmax
        | Function::Argmin
        | Function::FilterGt
        | Function::FilterGe
        | Function::FilterLt
        | Function::FilterLe
        | Function::FilterEq
        | Function::FilterNe
        | Function::FilterIn
        | Function::FilterNotIn
        | Function::SameAs => VarType::RowList,
        Function::First | Function::Last | Function::Previous | Function::Next => VarType::Row,
        Function::Count | Function::Max | Function::Min | Function::Average | Function::Sum | Function::Diff => {
            VarType::Number
        }
        Function::Mode => VarType::Cell,
    }
}

/// Tokens that may follow `prefix`. An invalid prefix yields the empty set.
pub fn valid_next_tokens(prefix: &[Token], table: &Table, literal_pool: &[Literal], grammar: &Grammar) -> Vec<Token> {
    let scope = Scope {
        table,
        literals: literal_pool,
        grammar,
    };
    match DecodeState::from_prefix(&scope, prefix) {
        Ok(s) => s.valid_next(&scope),
        Err(_) => Vec::new(),
    }
}
