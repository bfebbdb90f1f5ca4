use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Program;
use crate::env::Context;
use crate::policy::Policy;

#[derive(Debug, Error)]
pub enum BufferError {
    #[error("program `{program}` earns no reward on example `{example}`")]
    NotRewarded { example: String, program: String },
    #[error("buffer io on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// High-reward programs found for one example. Programs keep insertion
/// order; every one has reward 1 when it is inserted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryBuffer {
    example_id: String,
    programs: Vec<Program>,
    max_size: Option<usize>,
}

impl MemoryBuffer {
    pub fn new(example_id: impl Into<String>) -> MemoryBuffer {
        MemoryBuffer {
            example_id: example_id.into(),
            programs: Vec::new(),
            max_size: None,
        }
    }

    pub fn with_max_size(mut self, max_size: Option<usize>) -> MemoryBuffer {
        self.max_size = max_size;
        self
    }

    pub fn example_id(&self) -> &str {
        &self.example_id
    }

    pub fn programs(&self) -> &[Program] {
        &self.programs
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn contains(&self, p: &Program) -> bool {
        self.programs.contains(p)
    }

    /// Adds a program after re-executing it. Returns false for duplicates
    /// and when the buffer is full.
    pub fn insert(&mut self, ctx: &Context, program: Program) -> Result<bool, BufferError> {
        if ctx.reward(&program) <= 0.0 {
            return Err(BufferError::NotRewarded {
                example: ctx.id().to_string(),
                program: program.render(),
            });
        }
        if self.contains(&program) || self.max_size.is_some_and(|m| self.programs.len() >= m) {
            return Ok(false);
        }
        self.programs.push(program);
        Ok(true)
    }

    /// Builds a buffer from stored programs, revalidating each.
    pub fn from_programs(ctx: &Context, programs: Vec<Program>) -> Result<MemoryBuffer, BufferError> {
        let mut b = MemoryBuffer::new(ctx.id());
        for p in programs {
            b.insert(ctx, p)?;
        }
        Ok(b)
    }
}

/// Keeps the `k` programs with the highest log-prob under `policy`; ties
/// go to the lexicographically smaller program.
pub fn truncate_top_k(buffer: &MemoryBuffer, ctx: &Context, policy: &Policy, k: usize) -> MemoryBuffer {
    if buffer.len() <= k {
        return buffer.clone();
    }
    let mut scored: Vec<(f64, &Program)> = buffer
        .programs
        .iter()
        .map(|p| (policy.log_prob(ctx, p).unwrap_or(f64::NEG_INFINITY), p))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    MemoryBuffer {
        example_id: buffer.example_id.clone(),
        programs: scored.into_iter().take(k).map(|(_, p)| p.clone()).collect(),
        max_size: buffer.max_size,
    }
}

#[derive(Serialize, Deserialize)]
struct BufferLine {
    id: String,
    programs: Vec<Program>,
}

/// One JSON line per buffer: `{"id", "programs": [rendered, ...]}`.
pub fn save_buffers(path: &Path, buffers: &[MemoryBuffer]) -> Result<(), BufferError> {
    let mut text = String::new();
    for b in buffers {
        let line = BufferLine {
            id: b.example_id.clone(),
            programs: b.programs.clone(),
        };
        text.push_str(&serde_json::to_string(&line).expect("buffer serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| BufferError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads raw (id, programs) pairs; pair with [`MemoryBuffer::from_programs`]
/// to revalidate against the environment.
pub fn load_buffer_file(path: &Path) -> Result<Vec<(String, Vec<Program>)>, BufferError> {
    let text = fs::read_to_string(path).map_err(|source| BufferError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: BufferLine = serde_json::from_str(line).map_err(|e| BufferError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((l.id, l.programs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::olympics_context;

    const GOLD: &str = "(filter_in all_rows ['1st'] r.position-str) (last v0) (hop v1 r.venue-str) <EOS>";

    #[test]
    fn insert_revalidates_and_dedups() {
        let ctx = olympics_context();
        let mut b = MemoryBuffer::new(ctx.id());
        assert!(b.insert(&ctx, Program::parse(GOLD).unwrap()).unwrap());
        assert!(!b.insert(&ctx, Program::parse(GOLD).unwrap()).unwrap());
        assert!(b.insert(&ctx, Program::parse("(count all_rows) <EOS>").unwrap()).is_err());
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let ctx = olympics_context();
        let b = MemoryBuffer::from_programs(&ctx, vec![Program::parse(GOLD).unwrap()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("buffers.jsonl");
        save_buffers(&p, &[b.clone(), MemoryBuffer::new("empty")]).unwrap();
        let raw = load_buffer_file(&p).unwrap();
        assert_eq!(raw[1], ("empty".to_string(), vec![]));
        assert_eq!(MemoryBuffer::from_programs(&ctx, raw[0].1.clone()).unwrap(), b);
    }
}
