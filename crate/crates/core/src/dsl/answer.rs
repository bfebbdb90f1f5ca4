use super::value::{format_number, Value};

/// Canonical answer string: numbers printed without trailing zeros, text
/// case-folded and trimmed.
pub fn canonical(text: &str) -> String {
    let t = text.trim();
    match t.parse::<f64>() {
        Ok(x) if x.is_finite() => format_number(x),
        _ => t.to_lowercase(),
    }
}

/// Canonical strings for a denotation, or `None` when the value cannot be an
/// answer (errors, rows).
pub fn denotation_strings(value: &Value) -> Option<Vec<String>> {
    match value {
        Value::Number(x) => Some(vec![format_number(*x)]),
        Value::Date(d) => Some(vec![d.to_string()]),
        Value::String(s) => Some(vec![canonical(s)]),
        Value::CellList(cells) => Some(cells.iter().map(|c| canonical(&c.to_string())).collect()),
        Value::Row(_) | Value::RowList(_) | Value::Error(_) => None,
    }
}

/// True iff the canonicalized denotation equals the gold answer as a
/// multiset.
pub fn answer_match(value: &Value, answer: &[String]) -> bool {
    let Some(mut got) = denotation_strings(value) else {
        return false;
    };
    if got.is_empty() {
        return false;
    }
    let mut want: Vec<String> = answer.iter().map(|a| canonical(a)).collect();
    got.sort();
    want.sort();
    got == want
}
