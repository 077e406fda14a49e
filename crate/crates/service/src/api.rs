//! Request and response bodies. Masses are kg/m³, strength MPa.

use mixgen_core::data::{AgeGroup, ImpactVector, MixComposition};
use mixgen_core::EmbeddingResult;
use serde::{Deserialize, Serialize};

pub const MAX_COUNT: usize = 100_000;
pub const MAX_PAGE: usize = 5_000;
pub const MAX_EMBEDDING_MIXES: usize = 2_000;
/// Half-width of the strength band around the requested target, MPa.
pub const STRENGTH_TOLERANCE: f64 = 1.0;

fn one() -> f64 {
    1.0
}

fn page() -> usize {
    MAX_PAGE
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactCeilings {
    pub gwp: Option<f64>,
    pub ap: Option<f64>,
    pub cbw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequest {
    pub age_group: AgeGroup,
    /// Target strength, MPa.
    pub strength: f64,
    #[serde(default)]
    pub ceilings: ImpactCeilings,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub superplasticizer_scale: f64,
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "page")]
    pub limit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Units {
    pub mass: &'static str,
    pub strength: &'static str,
    pub gwp: &'static str,
    pub ap: &'static str,
    pub cbw: &'static str,
}

pub const UNITS: Units = Units {
    mass: "kg/m3",
    strength: "MPa",
    gwp: ImpactVector::UNITS[0],
    ap: ImpactVector::UNITS[1],
    cbw: ImpactVector::UNITS[2],
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateMix {
    /// Position in the raw generated sequence.
    pub index: usize,
    pub mix: MixComposition,
    pub predicted_strength: f64,
    pub impacts: ImpactVector,
    pub dominates_training: bool,
    pub marker_fractions: Option<[f64; 3]>,
    /// Some mass fell outside the training range.
    pub out_of_domain: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BestImpacts {
    pub gwp: Option<f64>,
    pub ap: Option<f64>,
    pub cbw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateSummary {
    pub raw_count: usize,
    pub in_band_count: usize,
    pub filtered_count: usize,
    pub dominating_count: usize,
    pub strength_band: [f64; 2],
    /// The target lay outside the training range and was clamped for conditioning.
    pub condition_clamped: bool,
    /// Training rows of the same age group in the strength band.
    pub reference_count: usize,
    pub best_reference: Option<ImpactVector>,
    /// Mean percentage reduction of the dominating candidates against `best_reference`.
    pub reduction_pct: Option<ImpactVector>,
    /// Lowest value of each impact among the filtered candidates.
    pub best: BestImpacts,
    pub offset: usize,
    pub limit: usize,
    pub returned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidatesResponse {
    pub age_group: AgeGroup,
    pub seed: u64,
    pub units: Units,
    pub summary: CandidateSummary,
    pub candidates: Vec<CandidateMix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub age_group: AgeGroup,
    pub mix: MixComposition,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreResponse {
    pub age_group: AgeGroup,
    pub units: Units,
    pub predicted_strength: f64,
    pub impacts: ImpactVector,
    pub marker_fractions: Option<[f64; 3]>,
    pub out_of_domain: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRequest {
    pub mixes: Vec<MixComposition>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    mixgen_core::analyze::DEFAULT_K
}

pub type EmbeddingResponse = EmbeddingResult;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelInfo {
    pub format: String,
    pub tool_version: String,
    pub seed: u64,
    pub dataset_sha256: String,
    pub coefficients_sha256: String,
    pub dataset_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub version: &'static str,
    pub model: ModelInfo,
}
