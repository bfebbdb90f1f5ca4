use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::example::{Context, ExampleRecord};
use crate::dsl::{Grammar, Table, TableError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("example `{example}` references missing table `{table_ref}`")]
    MissingTable { example: String, table_ref: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("table `{table_ref}`: {source}")]
    Table {
        table_ref: String,
        #[source]
        source: TableError,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EnvError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> EnvError {
        EnvError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Loaded examples plus the tables they reference.
#[derive(Debug, Default)]
pub struct Dataset {
    pub contexts: Vec<Arc<Context>>,
    pub tables: BTreeMap<String, Arc<Table>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}

/// Reads JSON-lines records; blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<ExampleRecord>, EnvError> {
    let text = fs::read_to_string(path).map_err(|e| EnvError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord = serde_json::from_str(line).map_err(|e| EnvError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Loads `<tables_dir>/<table_ref>.json`.
pub fn load_table(tables_dir: &Path, table_ref: &str) -> Result<Option<Table>, EnvError> {
    let path = tables_dir.join(format!("{table_ref}.json"));
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| EnvError::io(&path, e))?;
    Table::from_json_str(&text).map(Some).map_err(|source| EnvError::Table {
        table_ref: table_ref.to_string(),
        source,
    })
}

/// Loads a dataset file and resolves every table reference against
/// `tables_dir`. Literal pools are extracted on load.
pub fn load_dataset(dataset_path: &Path, tables_dir: &Path, grammar: &Grammar) -> Result<Dataset, EnvError> {
    let records = read_records(dataset_path)?;
    let grammar = Arc::new(grammar.clone());
    let mut tables: BTreeMap<String, Arc<Table>> = BTreeMap::new();
    let mut contexts = Vec::with_capacity(records.len());
    for rec in records {
        let table = match tables.get(&rec.table_ref) {
            Some(t) => t.clone(),
            None => {
                let t = load_table(tables_dir, &rec.table_ref)?.ok_or_else(|| EnvError::MissingTable {
                    example: rec.id.clone(),
                    table_ref: rec.table_ref.clone(),
                })?;
                let t = Arc::new(t);
                tables.insert(rec.table_ref.clone(), t.clone());
                t
            }
        };
        contexts.push(Arc::new(Context::from_record(rec, table, grammar.clone())));
    }
    Ok(Dataset { contexts, tables })
}
