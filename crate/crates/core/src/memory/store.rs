//! On-disk layout of a warm start: `buffers.jsonl` plus one explored-set
//! dump per example under `explored/`, named by example position.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::{load_buffer_file, save_buffers, BufferError, ExampleMemory, ExploredConfig, ExploredError, ExploredSet, MemoryBuffer};
use crate::env::Context;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("explored set {path}: {source}")]
    Explored {
        path: String,
        #[source]
        source: ExploredError,
    },
    #[error("no buffer for example `{0}`")]
    MissingExample(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn explored_path(dir: &Path, i: usize, set: &ExploredSet) -> PathBuf {
    let ext = match set {
        ExploredSet::Exact(_) => "json",
        ExploredSet::Bloom(_) => "bloom",
    };
    dir.join("explored").join(format!("{i:05}.{ext}"))
}

pub fn save_memories(dir: &Path, memories: &[ExampleMemory]) -> Result<(), StoreError> {
    let sub = dir.join("explored");
    fs::create_dir_all(&sub).map_err(|source| StoreError::Io {
        path: sub.display().to_string(),
        source,
    })?;
    let buffers: Vec<MemoryBuffer> = memories.iter().map(|m| m.buffer.clone()).collect();
    save_buffers(&dir.join("buffers.jsonl"), &buffers)?;
    for (i, m) in memories.iter().enumerate() {
        let path = explored_path(dir, i, &m.explored);
        m.explored.write(&path).map_err(|source| StoreError::Explored {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Loads memories for `contexts` by example id. Buffer programs are
/// revalidated; a missing explored dump starts from an empty set.
pub fn load_memories(dir: &Path, contexts: &[Arc<Context>], fallback: &ExploredConfig) -> Result<Vec<ExampleMemory>, StoreError> {
    let lines = load_buffer_file(&dir.join("buffers.jsonl"))?;
    let position: HashMap<&str, usize> = lines.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    let mut out = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let &i = position
            .get(ctx.id())
            .ok_or_else(|| StoreError::MissingExample(ctx.id().to_string()))?;
        let buffer = MemoryBuffer::from_programs(ctx, lines[i].1.clone())?;
        let explored = ["json", "bloom"]
            .iter()
            .map(|ext| dir.join("explored").join(format!("{i:05}.{ext}")))
            .find(|p| p.exists());
        let explored = match explored {
            Some(path) => ExploredSet::read(&path).map_err(|source| StoreError::Explored {
                path: path.display().to_string(),
                source,
            })?,
            None => fallback.build(),
        };
        out.push(ExampleMemory { buffer, explored });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::olympics_context;
    use crate::memory::warm_start;
    use crate::policy::{FeatureConfig, Policy};

    #[test]
    fn round_trip() {
        let ctx = Arc::new(olympics_context());
        let mems = warm_start(&[ctx.clone()], &Policy::new(FeatureConfig::default()), 50, None, &ExploredConfig::Exact, 3);
        let dir = tempfile::tempdir().unwrap();
        save_memories(dir.path(), &mems).unwrap();
        let back = load_memories(dir.path(), &[ctx], &ExploredConfig::Exact).unwrap();
        assert_eq!(back[0].buffer.programs(), mems[0].buffer.programs());
        assert_eq!(back[0].explored.len(), mems[0].explored.len());
    }
}
