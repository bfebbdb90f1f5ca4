use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use super::value::{format_number, Date, Kind};

/// The built-in functions of the table DSL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Function {
    Hop,
    Argmax,
    Argmin,
    FilterGt,
    FilterGe,
    FilterLt,
    FilterLe,
    FilterEq,
    FilterNe,
    FilterIn,
    FilterNotIn,
    First,
    Last,
    Previous,
    Next,
    Count,
    Max,
    Min,
    Average,
    Sum,
    Mode,
    SameAs,
    Diff,
}

/// What an argument position accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArgSlot {
    /// `all_rows` or a row-valued variable.
    Rows,
    /// A row-valued variable (a row list is coerced at run time).
    Row,
    Column(ColumnSlot),
    /// Number or date literal compared against a column of the same kind.
    CmpValue,
    /// String literal.
    StrValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColumnSlot {
    Any,
    Number,
    NumberOrDate,
    String,
    /// Same kind as the preceding comparison literal.
    MatchValue,
}

impl ColumnSlot {
    pub fn admits(self, kind: Kind, value_kind: Option<Kind>) -> bool {
        match self {
            ColumnSlot::Any => true,
            ColumnSlot::Number => kind == Kind::Number,
            ColumnSlot::NumberOrDate => kind != Kind::String,
            ColumnSlot::String => kind == Kind::String,
            ColumnSlot::MatchValue => value_kind == Some(kind),
        }
    }
}

impl Function {
    pub const ALL: [Function; 23] = [
        Function::Hop,
        Function::Argmax,
        Function::Argmin,
        Function::FilterGt,
        Function::FilterGe,
        Function::FilterLt,
        Function::FilterLe,
        Function::FilterEq,
        Function::FilterNe,
        Function::FilterIn,
        Function::FilterNotIn,
        Function::First,
        Function::Last,
        Function::Previous,
        Function::Next,
        Function::Count,
        Function::Max,
        Function::Min,
        Function::Average,
        Function::Sum,
        Function::Mode,
        Function::SameAs,
        Function::Diff,
    ];

    /// Subset used for SQL-like question sets.
    pub const SQL_SUBSET: [Function; 10] = [
        Function::Hop,
        Function::FilterEq,
        Function::FilterIn,
        Function::FilterGt,
        Function::FilterLt,
        Function::Count,
        Function::Max,
        Function::Min,
        Function::Average,
        Function::Sum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Hop => "hop",
            Function::Argmax => "argmax",
            Function::Argmin => "argmin",
            Function::FilterGt => "filter_>",
            Function::FilterGe => "filter_>=",
            Function::FilterLt => "filter_<",
            Function::FilterLe => "filter_<=",
            Function::FilterEq => "filter_=",
            Function::FilterNe => "filter_!=",
            Function::FilterIn => "filter_in",
            Function::FilterNotIn => "filter_!in",
            Function::First => "first",
            Function::Last => "last",
            Function::Previous => "previous",
            Function::Next => "next",
            Function::Count => "count",
            Function::Max => "max",
            Function::Min => "min",
            Function::Average => "average",
            Function::Sum => "sum",
            Function::Mode => "mode",
            Function::SameAs => "same_as",
            Function::Diff => "diff",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        let f = match name {
            "filter_≥" | "filter_ge" => Function::FilterGe,
            "filter_≤" | "filter_le" => Function::FilterLe,
            "filter_≠" | "filter_ne" => Function::FilterNe,
            "filter_gt" => Function::FilterGt,
            "filter_lt" => Function::FilterLt,
            "filter_eq" => Function::FilterEq,
            "filter_notin" => Function::FilterNotIn,
            "maximum" => Function::Max,
            "minimum" => Function::Min,
            "same" => Function::SameAs,
            _ => return Function::ALL.iter().copied().find(|f| f.name() == name),
        };
        Some(f)
    }

    pub fn signature(self) -> &'static [ArgSlot] {
        use ArgSlot::*;
        use ColumnSlot as C;
        match self {
            Function::Hop => &[Rows, Column(C::Any)],
            Function::Argmax | Function::Argmin => &[Rows, Column(C::NumberOrDate)],
            Function::FilterGt
            | Function::FilterGe
            | Function::FilterLt
            | Function::FilterLe
            | Function::FilterEq
            | Function::FilterNe => &[Rows, CmpValue, Column(C::MatchValue)],
            Function::FilterIn | Function::FilterNotIn => &[Rows, StrValue, Column(C::String)],
            Function::First | Function::Last | Function::Count => &[Rows],
            Function::Previous | Function::Next => &[Row],
            Function::Max | Function::Min | Function::Average | Function::Sum => {
                &[Rows, Column(C::Number)]
            }
            Function::Mode => &[Rows, Column(C::Any)],
            Function::SameAs => &[Row, Column(C::Any)],
            Function::Diff => &[Row, Row, Column(C::Number)],
        }
    }

    pub fn arity(self) -> usize {
        self.signature().len()
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    AllRows,
    Var(u16),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub id: Arc<str>,
    pub kind: Kind,
}

/// Constant drawn from the question. Numbers compare by bit pattern so that
/// literals can be hashed and ordered.
#[derive(Clone, Debug)]
pub enum Literal {
    Number(f64),
    Date(Date),
    String(Arc<str>),
}

impl Literal {
    pub fn kind(&self) -> Kind {
        match self {
            Literal::Number(_) => Kind::Number,
            Literal::Date(_) => Kind::Date,
            Literal::String(_) => Kind::String,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Literal::Number(_) => 0,
            Literal::Date(_) => 1,
            Literal::String(_) => 2,
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Literal {}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Literal::Number(a), Literal::Number(b)) => a.total_cmp(b),
            (Literal::Date(a), Literal::Date(b)) => a.cmp(b),
            (Literal::String(a), Literal::String(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Literal::Number(x) => x.to_bits().hash(state),
            Literal::Date(d) => d.hash(state),
            Literal::String(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(x) => write!(f, "[{}]", format_number(*x)),
            Literal::Date(d) => write!(f, "[{d}]"),
            Literal::String(s) => {
                f.write_str("['")?;
                for ch in s.chars() {
                    if ch == '\'' || ch == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{ch}")?;
                }
                f.write_str("']")
            }
        }
    }
}

/// One decoding action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Open,
    Close,
    Func(Function),
    Column(ColumnRef),
    Var(VarRef),
    Literal(Literal),
    Eos,
}

impl Token {
    pub fn column(id: &str, kind: Kind) -> Token {
        Token::Column(ColumnRef {
            id: Arc::from(id),
            kind,
        })
    }

    pub fn var(i: u16) -> Token {
        Token::Var(VarRef::Var(i))
    }

    pub fn string(s: &str) -> Token {
        Token::Literal(Literal::String(Arc::from(s)))
    }

    pub fn number(x: f64) -> Token {
        Token::Literal(Literal::Number(x))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open => f.write_str("("),
            Token::Close => f.write_str(")"),
            Token::Func(func) => f.write_str(func.name()),
            Token::Column(c) => write!(f, "r.{}-{}", c.id, c.kind.suffix()),
            Token::Var(VarRef::AllRows) => f.write_str("all_rows"),
            Token::Var(VarRef::Var(i)) => write!(f, "v{i}"),
            Token::Literal(l) => l.fmt(f),
            Token::Eos => f.write_str("<EOS>"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unbalanced parentheses at token {0}")]
    UnbalancedParens(usize),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
}

/// A token sequence in the DSL. Complete programs end with EOS.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Program {
    tokens: Vec<Token>,
}

impl Program {
    pub fn new(tokens: Vec<Token>) -> Program {
        Program { tokens }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.tokens.last() == Some(&Token::Eos)
    }

    /// Parses and checks that parentheses pair up as `( F A1 .. AK )`
    /// expressions without nesting.
    pub fn parse(text: &str) -> Result<Program, ParseError> {
        let tokens = tokenize(text)?;
        let mut open = false;
        for (i, t) in tokens.iter().enumerate() {
            match t {
                Token::Open if open => return Err(ParseError::UnbalancedParens(i)),
                Token::Open => open = true,
                Token::Close if !open => return Err(ParseError::UnbalancedParens(i)),
                Token::Close => open = false,
                _ => {}
            }
        }
        if open {
            return Err(ParseError::UnbalancedParens(tokens.len()));
        }
        Ok(Program { tokens })
    }

    /// Canonical whitespace-separated rendering.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl serde::Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Program, D::Error> {
        let text = String::deserialize(d)?;
        Program::parse(&text).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Program, ParseError> {
        Program::parse(s)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            t.fmt(f)?;
        }
        Ok(())
    }
}

/// Tokenizes without checking parenthesis structure, so prefixes are accepted.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            tokens.push(Token::Open);
            i += 1;
        } else if c == ')' {
            tokens.push(Token::Close);
            i += 1;
        } else if c == '[' {
            let (lit, next) = lex_literal(&chars, i)?;
            tokens.push(Token::Literal(lit));
            i = next;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | '[') {
                // `)` ends a word, but `filter_!in` etc. never contain it.
                if chars[i] == ')' {
                    break;
                }
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(word_token(&word)?);
        }
    }
    Ok(tokens)
}

fn lex_literal(chars: &[char], start: usize) -> Result<(Literal, usize), ParseError> {
    let mut i = start + 1;
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    if i < chars.len() && matches!(chars[i], '\'' | '`' | '‘') {
        i += 1;
        let mut s = String::new();
        loop {
            match chars.get(i) {
                None => return Err(ParseError::UnknownToken(chars[start..].iter().collect())),
                Some('\\') => {
                    if let Some(&n) = chars.get(i + 1) {
                        s.push(n);
                        i += 2;
                    } else {
                        return Err(ParseError::UnknownToken(chars[start..].iter().collect()));
                    }
                }
                Some('\'' | '’') => {
                    i += 1;
                    break;
                }
                Some(&c) => {
                    s.push(c);
                    i += 1;
                }
            }
        }
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if chars.get(i) != Some(&']') {
            return Err(ParseError::UnknownToken(chars[start..i.min(chars.len())].iter().collect()));
        }
        return Ok((Literal::String(Arc::from(s.as_str())), i + 1));
    }
    let body_start = i;
    while i < chars.len() && chars[i] != ']' {
        i += 1;
    }
    if i >= chars.len() {
        return Err(ParseError::UnknownToken(chars[start..].iter().collect()));
    }
    let body: String = chars[body_start..i].iter().collect();
    let body = body.trim();
    let lit = if let Some(d) = Date::parse(body) {
        Literal::Date(d)
    } else if let Ok(x) = body.parse::<f64>() {
        if !x.is_finite() {
            return Err(ParseError::UnknownToken(format!("[{body}]")));
        }
        Literal::Number(x)
    } else {
        return Err(ParseError::UnknownToken(format!("[{body}]")));
    };
    Ok((lit, i + 1))
}

fn word_token(word: &str) -> Result<Token, ParseError> {
    if word == "<EOS>" || word == "EOS" {
        return Ok(Token::Eos);
    }
    if word == "all_rows" {
        return Ok(Token::Var(VarRef::AllRows));
    }
    if let Some(n) = word.strip_prefix('v') {
        if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(i) = n.parse::<u16>() {
                return Ok(Token::var(i));
            }
        }
    }
    if let Some(rest) = word.strip_prefix("r.") {
        if let Some((id, suffix)) = rest.rsplit_once('-') {
            if let Some(kind) = Kind::from_suffix(suffix) {
                if !id.is_empty() {
                    return Ok(Token::column(id, kind));
                }
            }
        }
    }
    Function::from_name(word)
        .map(Token::Func)
        .ok_or_else(|| ParseError::UnknownToken(word.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_count_program() {
        let p = Program::parse("(count all_rows) <EOS>").unwrap();
        assert_eq!(
            p.tokens(),
            &[
                Token::Open,
                Token::Func(Function::Count),
                Token::Var(VarRef::AllRows),
                Token::Close,
                Token::Eos
            ]
        );
    }

    #[test]
    fn parses_superlative_program() {
        let p = Program::parse("(argmax all_rows r.points-num) (hop v0 r.player-str) <EOS>").unwrap();
        assert_eq!(p.tokens().iter().filter(|t| **t == Token::Open).count(), 2);
        assert_eq!(p.tokens()[2], Token::Var(VarRef::AllRows));
        assert_eq!(p.tokens()[3], Token::column("points", Kind::Number));
        assert_eq!(p.tokens()[7], Token::var(0));
    }

    #[test]
    fn unbalanced_parens() {
        assert!(matches!(Program::parse("((count"), Err(ParseError::UnbalancedParens(_))));
        assert!(matches!(Program::parse("count )"), Err(ParseError::UnbalancedParens(_))));
        assert!(matches!(Program::parse("(count all_rows"), Err(ParseError::UnbalancedParens(_))));
    }

    #[test]
    fn unknown_tokens() {
        assert_eq!(
            Program::parse("(frobnicate all_rows) <EOS>"),
            Err(ParseError::UnknownToken("frobnicate".into()))
        );
        assert!(Program::parse("(filter_in all_rows [nope] r.x-str)").is_err());
        assert!(Program::parse("r.x-blob").is_err());
    }

    #[test]
    fn literals_and_aliases() {
        let p = Program::parse("(filter_≥ all_rows [2] r.score-num) (filter_in v0 ['los angeles'] r.city-str) <EOS>")
            .unwrap();
        assert_eq!(p.tokens()[1], Token::Func(Function::FilterGe));
        assert_eq!(p.tokens()[3], Token::number(2.0));
        assert_eq!(p.tokens()[9], Token::string("los angeles"));
        assert_eq!(
            p.render(),
            "( filter_>= all_rows [2] r.score-num ) ( filter_in v0 ['los angeles'] r.city-str ) <EOS>"
        );
        let q = Program::parse("(filter_in all_rows ['men\\'s'] r.a-b-str) <EOS>").unwrap();
        assert_eq!(q.tokens()[3], Token::string("men's"));
        assert_eq!(q.tokens()[4], Token::column("a-b", Kind::String));
        assert_eq!(Program::parse(&q.render()).unwrap(), q);
        let d = Program::parse("(filter_< all_rows [2001-xx-03] r.when-date) <EOS>").unwrap();
        assert_eq!(d.tokens()[3], Token::Literal(Literal::Date(Date::new(Some(2001), None, Some(3)).unwrap())));
    }

    #[test]
    fn every_function_name_round_trips() {
        for f in Function::ALL {
            assert_eq!(Function::from_name(f.name()), Some(f));
        }
    }
}
