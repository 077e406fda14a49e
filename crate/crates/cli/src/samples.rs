//! The samples CSV written by `generate` and read by `analyze`.

use std::borrow::Borrow;
use std::path::Path;

use anyhow::{Context, Result};
use mixgen_core::analyze::ScoredMix;
use mixgen_core::data::{AgeGroup, ImpactVector, MixComposition};
use serde::{Deserialize, Serialize};

/// One generated mix. Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub age_group: AgeGroup,
    pub cement: f64,
    pub slag: f64,
    pub fly_ash: f64,
    pub water: f64,
    pub superplasticizer: f64,
    pub coarse_aggregate: f64,
    pub fine_aggregate: f64,
    /// Conditioning values in physical units.
    pub cond_strength: f64,
    pub cond_gwp: f64,
    pub cond_ap: f64,
    pub cond_cbw: f64,
    pub z0: f64,
    pub z1: f64,
    pub predicted_strength: f64,
    pub predicted_gwp: f64,
    pub predicted_ap: f64,
    pub predicted_cbw: f64,
    /// Impacts from the coefficient table.
    pub lca_gwp: f64,
    pub lca_ap: f64,
    pub lca_cbw: f64,
    pub out_of_domain: bool,
}

impl SampleRecord {
    pub fn mix(&self) -> MixComposition {
        MixComposition {
            cement: self.cement,
            slag: self.slag,
            fly_ash: self.fly_ash,
            water: self.water,
            superplasticizer: self.superplasticizer,
            coarse_aggregate: self.coarse_aggregate,
            fine_aggregate: self.fine_aggregate,
        }
    }

    /// Scored by the predictors, which is how generated mixes enter dominance checks.
    pub fn scored(&self) -> ScoredMix {
        ScoredMix {
            mix: self.mix(),
            age_group: self.age_group,
            strength: self.predicted_strength,
            impacts: ImpactVector::new(self.predicted_gwp, self.predicted_ap, self.predicted_cbw),
        }
    }
}

/// Header of a samples CSV, written even when there are no rows.
pub const SAMPLE_COLUMNS: [&str; 23] = [
    "index", "age_group", "cement", "slag", "fly_ash", "water", "superplasticizer", "coarse_aggregate",
    "fine_aggregate", "cond_strength", "cond_gwp", "cond_ap", "cond_cbw", "z0", "z1", "predicted_strength",
    "predicted_gwp", "predicted_ap", "predicted_cbw", "lca_gwp", "lca_ap", "lca_cbw", "out_of_domain",
];

pub fn samples_to_csv<R: std::borrow::Borrow<SampleRecord>>(rows: &[R]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SAMPLE_COLUMNS)?;
        return Ok(w.into_inner().map_err(|e| e.into_error())?);
    }
    to_csv(&rows.iter().map(Borrow::borrow).collect::<Vec<&SampleRecord>>())
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

/// Rows with the seven mass columns (by header name) and an optional `label`.
pub fn read_mixes(path: &Path) -> Result<(Vec<String>, Vec<MixComposition>)> {
    #[derive(Deserialize)]
    struct Row {
        label: Option<String>,
        #[serde(flatten)]
        mix: MixComposition,
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut labels = Vec::new();
    let mut mixes = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("parsing {} row {}", path.display(), i + 1))?;
        labels.push(row.label.unwrap_or_else(|| format!("{}", i)));
        mixes.push(row.mix);
    }
    Ok((labels, mixes))
}
