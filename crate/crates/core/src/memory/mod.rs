//! Memory buffers, the explored-sequence set and systematic exploration.

pub mod buffer;
pub mod explore;
pub mod explored;
pub mod fingerprint;
pub mod rules;
pub mod store;

pub use buffer::{load_buffer_file, save_buffers, truncate_top_k, BufferError, MemoryBuffer};
pub use explore::{systematic_explore, warm_start, Coverage, ExampleMemory, ExploreOutcome};
pub use explored::{BloomFilter, ExploredConfig, ExploredError, ExploredSet};
pub use fingerprint::{fingerprint, fingerprint_str, Fingerprinter};
pub use rules::PruningRules;
pub use store::{load_memories, save_memories, StoreError};
