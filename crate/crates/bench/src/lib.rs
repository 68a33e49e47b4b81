//! Dataset generators, an exact-rank oracle, and benchmark runs for
//! [`splinesketch`].

pub mod datagen;
pub mod harness;
pub mod oracle;

pub use datagen::{generate, Dataset, DatasetSpec};
pub use harness::{AlgoConfig, BenchRecord};
pub use oracle::{ErrorReport, ExactOracle};
