//! Conditional generative design of low-carbon concrete mixes.
//!
//! The pipeline ingests the UCI concrete dataset, attaches lifecycle impacts
//! from a linear coefficient table, trains a conditional VAE that generates
//! mix compositions from strength/age/impact targets, scores candidates with
//! neural property predictors, and analyzes which candidates beat the
//! training data in all three impact dimensions.

pub mod analyze;
pub mod bundle;
pub mod cvae;
pub mod data;
pub mod nn;
pub mod predict;
pub mod rng;

pub use analyze::{AnalyzeError, DominanceQuery, EmbeddingResult, HullResult, ReductionReport, ScoredMix};
pub use bundle::{BundleError, ModelBundle, ModelMetadata};
pub use cvae::{ConditioningVector, CvaeError, CvaeModel, GeneratedSample, LatentCode, SamplerSpec, TrainConfig};
pub use data::{AgeGroup, DataError, Dataset, ImpactCoefficientTable, ImpactVector, LabeledMix, MixComposition, NormalizationStats};
pub use predict::{PredictError, PredictorConfig, PredictorModel, PredictorSet, RegressionMetrics, Score, Target};
