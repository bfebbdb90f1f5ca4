//! Examples, datasets, rewards, exhaustive enumeration and the toy corpus.

pub mod corpus;
pub mod dataset;
pub mod enumerate;
pub mod example;

pub use corpus::{make_toy_corpus, read_gold, Category, GoldRecord, ToyCorpus};
pub use dataset::{load_dataset, read_records, Dataset, EnvError};
pub use enumerate::{count_programs, enumerate_programs, SpaceTooLarge, MAX_ENUMERATION};
pub use example::{reward, Context, Cues, Example, ExampleRecord};
