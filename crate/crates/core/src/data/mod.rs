//! Dataset ingestion, lifecycle-impact estimation, feature scaling and
//! curing-age grouping.

mod age;
mod coeffs;
mod dataset;
mod mix;
mod normalize;
pub mod reference;

pub use age::{group_by_age, AgeGroup};
pub use coeffs::{
    calibrate, calibrate_reference, compute_impacts, ImpactCoefficientTable, IngredientCoefficients,
    CALIBRATION_HEADER, DEFAULT_TABLE_TEXT,
    WATER_CBW_PER_KG,
};
pub use dataset::{load_dataset, sha256_hex, Dataset, RowError, DATASET_COLUMNS};
pub use mix::{ImpactVector, Ingredient, LabeledMix, MixComposition, TOTAL_MASS_BAND};
pub use normalize::{feature_row, Feature, NormalizationStats, Normalized, FEATURE_COUNT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("unexpected header: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{ingredient} mass must be finite and >= 0, found {value}")]
    InvalidMass { ingredient: Ingredient, value: f64 },
    #[error("total mass {0} kg/m3 outside the accepted band")]
    TotalMassOutOfBand(f64),
    #[error("unknown ingredient {0:?}")]
    UnknownIngredient(String),
    #[error("unknown age group {0:?} (expected one of LE3, D7, D14, D28, D56, GE90)")]
    UnknownAgeGroup(String),
    #[error("coefficient table line {line}: {message}")]
    CoefficientLine { line: usize, message: String },
    #[error("coefficient table has no entry for {0}")]
    MissingCoefficient(Ingredient),
    #[error("invalid coefficient for {ingredient}: {reason}")]
    InvalidCoefficient { ingredient: Ingredient, reason: String },
    #[error("feature {0} has no spread in the training data")]
    DegenerateFeature(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
