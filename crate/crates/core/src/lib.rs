//! Mergeable streaming quantile sketch.
//!
//! A [`Sketch`] keeps `k` adaptive buckets over the input range and answers
//! rank and quantile queries by interpolating the bucket prefix sums with a
//! monotone cubic. Sketches merge pairwise, serialize to `18 + 16k` bytes,
//! and can optionally route frequent items through a Misra-Gries table.
//!
//! ```
//! use splinesketch::Sketch;
//!
//! let mut s = Sketch::with_k(64).unwrap();
//! for i in 0..100_000 {
//!     s.update((i % 1000) as f64).unwrap();
//! }
//! let median = s.quantile(0.5).unwrap();
//! assert!((median - 500.0).abs() < 10.0);
//! ```

pub mod codec;
mod consolidate;
pub mod error;
pub mod heavy_hitters;
pub mod interpolation;
mod merge;
pub mod sketch;

pub use codec::{deserialize, parse_values, serialize, serialized_size, write_values};
pub use consolidate::ConsolidatePlan;
pub use error::{FormatError, Result, SketchError};
pub use heavy_hitters::{HeavyCounts, MisraGries};
pub use interpolation::{Interpolant, InterpolationKind, BETA};
pub use sketch::{compressed_bucket_count, HeuristicKind, Sketch, SketchConfig, SketchStats};
