//! Post-generation analyses: dominance filtering against training bests,
//! convex hulls in impact space, isomap embeddings, strength progression
//! and regional benchmark comparison.

mod benchmark;
mod dominance;
mod hull;
mod isomap;
mod progression;

pub use benchmark::{benchmark_compare, default_benchmarks, percent_below, Benchmark, BenchmarkRow};
pub use dominance::{filter_dominating, DominanceQuery, ReductionReport, ScoredMix};
pub use hull::{convex_hull_3d, nearest_indices, HullResult};
pub use isomap::{
    isomap, isomap_auto, isomap_points, marker_fractions, standardize, EmbeddingResult, DEFAULT_K, MAX_K,
};
pub use progression::{group_strength_range, strength_progression, ProgressionResult, ProgressionRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("no reference band: no training rows for {group} within {lo}..={hi} MPa")]
    NoReferenceBand { group: String, lo: f64, hi: f64 },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("neighborhood graph is disconnected; component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },
    #[error("embedding has no positive eigenvalue")]
    NoPositiveEigenvalue,
    #[error("non-finite input at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Cvae(#[from] crate::cvae::CvaeError),
}
