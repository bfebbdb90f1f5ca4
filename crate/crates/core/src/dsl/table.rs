use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use super::value::{format_number, Cell, Date, Kind};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("duplicate column id `{0}`")]
    DuplicateColumn(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowWidth {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row}, column `{column}`: {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("invalid column id `{0}`")]
    BadColumnId(String),
    #[error("table json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: String,
    pub name: String,
    pub kind: Kind,
}

impl Column {
    pub fn new(id: impl Into<String>, name: impl Into<String>, kind: Kind) -> Column {
        Column {
            id: id.into(),
            name: name.into(),
            kind,
        }
    }
}

/// A typed relation. Row order is meaningful (`previous`, `next`, `first`,
/// `last` all use it).
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<Option<Cell>>>,
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<Option<Cell>>>,
    ) -> Result<Table, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.id.is_empty() || c.id.chars().any(|ch| ch.is_whitespace() || "()[]'".contains(ch)) {
                return Err(TableError::BadColumnId(c.id.clone()));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(TableError::DuplicateColumn(c.id.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowWidth {
                    row: r,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if let Some(cell) = cell {
                    if cell.kind() != col.kind {
                        return Err(TableError::BadCell {
                            row: r,
                            column: col.id.clone(),
                            reason: format!("expected {:?}, found {:?}", col.kind, cell.kind()),
                        });
                    }
                }
            }
        }
        Ok(Table {
            name: name.into(),
            columns,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Option<Cell>>] {
        &self.rows
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.rows.get(row).and_then(|r| r.get(col)).and_then(|c| c.as_ref())
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).collect()
    }

    pub fn from_json_str(text: &str) -> Result<Table, TableError> {
        let file: TableFile = serde_json::from_str(text)?;
        file.into_table()
    }

    pub fn load(path: &Path) -> Result<Table, TableError> {
        Table::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Json {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| Json::Array(row.iter().map(cell_to_json).collect()))
            .collect();
        serde_json::json!({
            "name": self.name,
            "columns": self.columns,
            "rows": rows,
        })
    }
}

#[derive(Deserialize)]
struct TableFile {
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<Json>>,
}

impl TableFile {
    fn into_table(self) -> Result<Table, TableError> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (r, raw) in self.rows.into_iter().enumerate() {
            if raw.len() != self.columns.len() {
                return Err(TableError::RowWidth {
                    row: r,
                    found: raw.len(),
                    expected: self.columns.len(),
                });
            }
            let mut row = Vec::with_capacity(raw.len());
            for (cell, col) in raw.into_iter().zip(&self.columns) {
                row.push(cell_from_json(cell, col.kind).map_err(|reason| TableError::BadCell {
                    row: r,
                    column: col.id.clone(),
                    reason,
                })?);
            }
            rows.push(row);
        }
        Table::new(self.name, self.columns, rows)
    }
}

fn cell_from_json(cell: Json, kind: Kind) -> Result<Option<Cell>, String> {
    match (cell, kind) {
        (Json::Null, _) => Ok(None),
        (Json::String(s), Kind::String) => Ok(Some(Cell::String(s))),
        (Json::Number(n), Kind::Number) => n
            .as_f64()
            .map(|x| Some(Cell::Number(x)))
            .ok_or_else(|| "number out of range".to_string()),
        (Json::String(s), Kind::Number) => s
            .trim()
            .parse::<f64>()
            .map(|x| Some(Cell::Number(x)))
            .map_err(|_| format!("`{s}` is not a number")),
        (Json::String(s), Kind::Date) => Date::parse(&s)
            .map(|d| Some(Cell::Date(d)))
            .ok_or_else(|| format!("`{s}` is not a date")),
        (obj @ Json::Object(_), Kind::Date) => {
            let d: Date = serde_json::from_value(obj).map_err(|e| e.to_string())?;
            if d.is_valid() {
                Ok(Some(Cell::Date(d)))
            } else {
                Err("date with all parts missing".to_string())
            }
        }
        (other, kind) => Err(format!("{other} does not fit a {kind:?} column")),
    }
}

fn cell_to_json(cell: &Option<Cell>) -> Json {
    match cell {
        None => Json::Null,
        Some(Cell::Number(x)) => serde_json::Number::from_f64(*x)
            .map(Json::Number)
            .unwrap_or_else(|| Json::String(format_number(*x))),
        Some(Cell::String(s)) => Json::String(s.clone()),
        Some(Cell::Date(d)) => serde_json::to_value(d).expect("date serializes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"name":"t","columns":[{"id":"a","name":"A","kind":"number"},
            {"id":"b","name":"B","kind":"date"},{"id":"c","name":"C","kind":"string"}],
            "rows":[[1.5,{"y":2001},"x"],[null,{"y":2002,"m":3,"d":4},null]]}"#;
        let t = Table::from_json_str(text).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.cell(0, 1), Some(&Cell::Date(Date::new(Some(2001), None, None).unwrap())));
        let back = Table::from_json_str(&t.to_json().to_string()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_tables() {
        let cols = vec![Column::new("a", "A", Kind::Number), Column::new("a", "A", Kind::Number)];
        assert!(matches!(Table::new("t", cols, vec![]), Err(TableError::DuplicateColumn(_))));
        let cols = vec![Column::new("a", "A", Kind::Number)];
        let rows = vec![vec![None, None]];
        assert!(matches!(Table::new("t", cols.clone(), rows), Err(TableError::RowWidth { .. })));
        let rows = vec![vec![Some(Cell::String("x".into()))]];
        assert!(matches!(Table::new("t", cols, rows), Err(TableError::BadCell { .. })));
        let bad = r#"{"name":"t","columns":[{"id":"d","name":"D","kind":"date"}],"rows":[[{}]]}"#;
        assert!(Table::from_json_str(bad).is_err());
    }
}
