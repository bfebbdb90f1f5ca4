pub mod analysis;
pub mod cli;
pub mod dsl;
pub mod env;
pub mod estimators;
pub mod fixtures;
pub mod memory;
pub mod policy;
pub mod rng;
pub mod trainer;
