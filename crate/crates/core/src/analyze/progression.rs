use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::cvae::{batch_generate, CvaeModel, GeneratedSample, SamplerSpec, UnitInterval};
use crate::data::{AgeGroup, Feature, LabeledMix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressionRow {
    pub conditioned_strength: f64,
    pub predicted_strength: f64,
    pub sample: GeneratedSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressionResult {
    pub age_group: AgeGroup,
    /// Physical strength range (MPa) swept by the conditioning value.
    pub strength_range: (f64, f64),
    pub rows: Vec<ProgressionRow>,
    pub rmse: f64,
}

/// Minimum and maximum training strength within one age group.
pub fn group_strength_range(rows: &[LabeledMix], group: AgeGroup) -> Option<(f64, f64)> {
    rows.iter()
        .filter(|r| r.age_group() == group)
        .map(|r| r.strength)
        .fold(None, |acc, s| Some(acc.map_or((s, s), |(lo, hi): (f64, f64)| (lo.min(s), hi.max(s)))))
}

/// Generates `count` samples with the strength condition swept uniformly
/// between `strength_range` endpoints (the impact conditions stay `U[0, 1]`),
/// scores them with `predict`, and reports the RMSE between conditioned and
/// predicted strength.
pub fn strength_progression<F>(
    model: &CvaeModel,
    predict: F,
    age_group: AgeGroup,
    strength_range: (f64, f64),
    count: usize,
    seed: u64,
) -> Result<ProgressionResult, AnalyzeError>
where
    F: Fn(&GeneratedSample) -> f64,
{
    let stats = model.stats();
    let (lo, _) = stats.normalize_value(Feature::Strength, strength_range.0);
    let (hi, _) = stats.normalize_value(Feature::Strength, strength_range.1);
    if lo > hi {
        return Err(AnalyzeError::InvalidQuery("strength range has min > max".into()));
    }
    let spec = SamplerSpec { strength: UnitInterval { lo, hi }, ..SamplerSpec::default() };
    let samples = batch_generate(model, count, age_group, &spec, seed)?;
    let rows: Vec<ProgressionRow> = samples
        .into_iter()
        .map(|sample| ProgressionRow {
            conditioned_strength: stats.denormalize_value(Feature::Strength, sample.condition.strength),
            predicted_strength: predict(&sample),
            sample,
        })
        .collect();
    let rmse = if rows.is_empty() {
        0.0
    } else {
        (rows.iter().map(|r| (r.predicted_strength - r.conditioned_strength).powi(2)).sum::<f64>() / rows.len() as f64).sqrt()
    };
    Ok(ProgressionResult { age_group, strength_range, rows, rmse })
}
