use serde::{Deserialize, Serialize};

use super::{DataError, Ingredient, LabeledMix, MixComposition};

/// Number of scaled features: 7 ingredients, strength, age, 3 impacts.
pub const FEATURE_COUNT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Ingredient(Ingredient),
    Strength,
    Age,
    Gwp,
    Ap,
    Cbw,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Ingredient(Ingredient::Cement),
        Feature::Ingredient(Ingredient::Slag),
        Feature::Ingredient(Ingredient::FlyAsh),
        Feature::Ingredient(Ingredient::Water),
        Feature::Ingredient(Ingredient::Superplasticizer),
        Feature::Ingredient(Ingredient::CoarseAggregate),
        Feature::Ingredient(Ingredient::FineAggregate),
        Feature::Strength,
        Feature::Age,
        Feature::Gwp,
        Feature::Ap,
        Feature::Cbw,
    ];

    pub fn index(self) -> usize {
        match self {
            Feature::Ingredient(i) => i.index(),
            Feature::Strength => 7,
            Feature::Age => 8,
            Feature::Gwp => 9,
            Feature::Ap => 10,
            Feature::Cbw => 11,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Ingredient(i) => i.name(),
            Feature::Strength => "strength",
            Feature::Age => "age",
            Feature::Gwp => "gwp",
            Feature::Ap => "ap",
            Feature::Cbw => "cbw",
        }
    }

    pub fn impacts() -> [Feature; 3] {
        [Feature::Gwp, Feature::Ap, Feature::Cbw]
    }
}

/// Flattens a row into the 12-feature layout used by [`NormalizationStats`].
pub fn feature_row(row: &LabeledMix) -> [f64; FEATURE_COUNT] {
    let mut v = [0.0; FEATURE_COUNT];
    v[..7].copy_from_slice(&row.mix.to_array());
    v[7] = row.strength;
    v[8] = f64::from(row.age_days);
    v[9..].copy_from_slice(&row.impacts.to_array());
    v
}

/// Result of scaling raw values into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Positions (within `values`) that fell outside the training range and were clamped.
    pub clamped: Vec<usize>,
}

impl Normalized {
    pub fn is_clamped(&self) -> bool {
        !self.clamped.is_empty()
    }
}

/// Per-feature min/max over the training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: [f64; FEATURE_COUNT],
    pub max: [f64; FEATURE_COUNT],
}

impl NormalizationStats {
    pub fn from_rows(rows: &[LabeledMix]) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let mut min = [f64::INFINITY; FEATURE_COUNT];
        let mut max = [f64::NEG_INFINITY; FEATURE_COUNT];
        for row in rows {
            for (i, v) in feature_row(row).into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        let stats = Self { min, max };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for feature in Feature::ALL {
            let i = feature.index();
            if !(self.max[i] > self.min[i]) || !self.min[i].is_finite() || !self.max[i].is_finite() {
                return Err(DataError::DegenerateFeature(feature.name()));
            }
        }
        Ok(())
    }

    pub fn range(&self, feature: Feature) -> (f64, f64) {
        (self.min[feature.index()], self.max[feature.index()])
    }

    /// Scales one value; returns the clamped result and whether clamping occurred.
    pub fn normalize_value(&self, feature: Feature, v: f64) -> (f64, bool) {
        let (lo, hi) = self.range(feature);
        let t = (v - lo) / (hi - lo);
        if t < 0.0 {
            (0.0, true)
        } else if t > 1.0 {
            (1.0, true)
        } else {
            (t, false)
        }
    }

    pub fn denormalize_value(&self, feature: Feature, t: f64) -> f64 {
        let (lo, hi) = self.range(feature);
        lo + t * (hi - lo)
    }

    /// Scales the values of `features` (parallel slices).
    pub fn normalize_features(&self, features: &[Feature], values: &[f64]) -> Result<Normalized, DataError> {
        if features.len() != values.len() {
            return Err(DataError::DimensionMismatch { expected: features.len(), found: values.len() });
        }
        let mut out = Normalized { values: Vec::with_capacity(values.len()), clamped: Vec::new() };
        for (pos, (&f, &v)) in features.iter().zip(values).enumerate() {
            let (t, clamped) = self.normalize_value(f, v);
            if clamped {
                out.clamped.push(pos);
            }
            out.values.push(t);
        }
        if out.is_clamped() {
            log::warn!("{} value(s) outside the training range clamped to [0, 1]", out.clamped.len());
        }
        Ok(out)
    }

    /// Scales a full 12-feature vector.
    pub fn normalize(&self, values: &[f64]) -> Result<Normalized, DataError> {
        self.normalize_features(&Feature::ALL, values)
    }

    /// Inverse of [`normalize`](Self::normalize) for a full 12-feature vector.
    pub fn denormalize(&self, values: &[f64]) -> Result<Vec<f64>, DataError> {
        if values.len() != FEATURE_COUNT {
            return Err(DataError::DimensionMismatch { expected: FEATURE_COUNT, found: values.len() });
        }
        Ok(Feature::ALL
            .iter()
            .zip(values)
            .map(|(&f, &t)| self.denormalize_value(f, t))
            .collect())
    }

    pub fn normalize_mix(&self, mix: &MixComposition) -> Normalized {
        self.normalize_features(&Feature::ALL[..7], &mix.to_array())
            .expect("seven features for seven masses")
    }

    pub fn denormalize_mix(&self, values: &[f64]) -> Result<MixComposition, DataError> {
        if values.len() != 7 {
            return Err(DataError::DimensionMismatch { expected: 7, found: values.len() });
        }
        Ok(MixComposition::from_array(std::array::from_fn(|i| {
            self.denormalize_value(Feature::ALL[i], values[i])
        })))
    }
}
