use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Cell kind of a table column. Rendered as the `-num` / `-date` / `-str`
/// suffix of a column reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Number,
    Date,
    String,
}

impl Kind {
    pub fn suffix(self) -> &'static str {
        match self {
            Kind::Number => "num",
            Kind::Date => "date",
            Kind::String => "str",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Kind> {
        match s {
            "num" | "number" => Some(Kind::Number),
            "date" => Some(Kind::Date),
            "str" | "string" => Some(Kind::String),
            _ => None,
        }
    }
}

/// Calendar date where any part may be unknown.
///
/// Missing parts behave as wildcards in comparisons, so `2001-xx-xx` is
/// equal to every date in 2001.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Date {
    #[serde(rename = "y", default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(rename = "m", default, skip_serializing_if = "Option::is_none")]
    pub month: Option<u32>,
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
}

impl Date {
    /// Returns `None` when every part is missing.
    pub fn new(year: Option<i32>, month: Option<u32>, day: Option<u32>) -> Option<Date> {
        if year.is_none() && month.is_none() && day.is_none() {
            return None;
        }
        Some(Date { year, month, day })
    }

    pub fn ymd(year: i32, month: u32, day: u32) -> Date {
        Date {
            year: Some(year),
            month: Some(month),
            day: Some(day),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.year.is_some() || self.month.is_some() || self.day.is_some()
    }

    /// Lexicographic on (year, month, day); a part missing on either side
    /// compares equal.
    pub fn wildcard_cmp(&self, other: &Date) -> Ordering {
        fn part<T: Ord>(a: Option<T>, b: Option<T>) -> Ordering {
            match (a, b) {
                (Some(a), Some(b)) => a.cmp(&b),
                _ => Ordering::Equal,
            }
        }
        part(self.year, other.year)
            .then(part(self.month, other.month))
            .then(part(self.day, other.day))
    }

    /// Parses `yyyy-mm-dd` where any field may be `xx`.
    pub fn parse(text: &str) -> Option<Date> {
        let mut parts = text.split('-');
        let y = parts.next()?;
        let m = parts.next()?;
        let d = parts.next()?;
        if parts.next().is_some() {
            return None;
        }
        fn field<T: std::str::FromStr>(s: &str, width: usize) -> Option<Option<T>> {
            if s.eq_ignore_ascii_case("xx") || s.eq_ignore_ascii_case("xxxx") {
                return Some(None);
            }
            if s.len() != width || !s.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            s.parse().ok().map(Some)
        }
        let year = field::<i32>(y, 4)?;
        let month = field::<u32>(m, 2)?;
        let day = field::<u32>(d, 2)?;
        if matches!(month, Some(m) if !(1..=12).contains(&m)) || matches!(day, Some(d) if !(1..=31).contains(&d)) {
            return None;
        }
        Date::new(year, month, day)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.year {
            Some(y) => write!(f, "{y:04}")?,
            None => f.write_str("xxxx")?,
        }
        match self.month {
            Some(m) => write!(f, "-{m:02}")?,
            None => f.write_str("-xx")?,
        }
        match self.day {
            Some(d) => write!(f, "-{d:02}"),
            None => f.write_str("-xx"),
        }
    }
}

/// Canonical number printing: no trailing zeros, no negative zero.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

/// A non-empty table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Number(f64),
    Date(Date),
    String(String),
}

impl Cell {
    pub fn kind(&self) -> Kind {
        match self {
            Cell::Number(_) => Kind::Number,
            Cell::Date(_) => Kind::Date,
            Cell::String(_) => Kind::String,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    /// Exact identity used by `mode` and `same_as`.
    pub fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a == b,
            (Cell::Date(a), Cell::Date(b)) => a == b,
            (Cell::String(a), Cell::String(b)) => a == b,
            _ => false,
        }
    }

    /// Ordering for number and date cells; `None` for strings or mixed kinds.
    pub fn order(&self, other: &Cell) -> Option<Ordering> {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.partial_cmp(b),
            (Cell::Date(a), Cell::Date(b)) => Some(a.wildcard_cmp(b)),
            _ => None,
        }
    }

    pub fn into_value(self) -> Value {
        match self {
            Cell::Number(x) => Value::Number(x),
            Cell::Date(d) => Value::Date(d),
            Cell::String(s) => Value::String(s),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(x) => f.write_str(&format_number(*x)),
            Cell::Date(d) => d.fmt(f),
            Cell::String(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    TypeError,
    EmptyInput,
    OutOfTable,
    BudgetExceeded,
    /// A row argument received a row list with more than one row.
    NotSingleRow,
    /// The program does not end with EOS.
    Incomplete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecError {
    pub code: ErrorCode,
    pub message: String,
}

/// Result of evaluating a DSL expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(f64),
    Date(Date),
    String(String),
    Row(usize),
    /// Unique, ascending row indices.
    RowList(Vec<usize>),
    CellList(Vec<Cell>),
    Error(ExecError),
}

impl Value {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Value {
        Value::Error(ExecError {
            code,
            message: message.into(),
        })
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error(_))
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match self {
            Value::Error(e) => Some(e.code),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn date_wildcards_compare_equal() {
        let full = Date::ymd(2001, 5, 3);
        let year_only = Date::new(Some(2001), None, None).unwrap();
        assert_eq!(full.wildcard_cmp(&year_only), Ordering::Equal);
        assert_eq!(Date::ymd(2001, 5, 3).wildcard_cmp(&Date::ymd(2001, 6, 1)), Ordering::Less);
        assert!(Date::new(None, None, None).is_none());
    }

    #[test]
    fn date_render_parse() {
        let d = Date::new(Some(1999), None, Some(7)).unwrap();
        assert_eq!(d.to_string(), "1999-xx-07");
        assert_eq!(Date::parse("1999-xx-07"), Some(d));
        assert_eq!(Date::parse("1999-13-07"), None);
        assert_eq!(Date::parse("xxxx-xx-xx"), None);
    }

    #[test]
    fn number_format_drops_trailing_zeros() {
        assert_eq!(format_number(5.0), "5");
        assert_eq!(format_number(2.50), "2.5");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(182.05), "182.05");
    }
}
