//! Linear per-ingredient lifecycle-impact model.
//!
//! Each impact of a mix is `Σ mass × per-kg coefficient` over the seven
//! ingredients. The shipped default table is fitted against the lab mixes in
//! [`super::reference`] by [`calibrate`].

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DataError, ImpactVector, Ingredient, MixComposition};

/// Batching water attributed per kg of mix water: 1 kg of water is 1 L.
pub const WATER_CBW_PER_KG: f64 = 0.001;

/// The calibrated default table, stored as a versioned fixture.
pub const DEFAULT_TABLE_TEXT: &str = include_str!("../../../../data/coefficients-v1.txt");

/// Comment header written above a freshly calibrated table.
pub const CALIBRATION_HEADER: &str = "mixgen impact coefficients, version 1
Fitted to the five lab-tested mixes by clamped minimum-norm least squares
(regenerate with: mixgen calibrate). Units per kg of ingredient:
gwp kg CO2 eq., ap kg SO2 eq., cbw m3 batching water.";

/// Calibrates against the published lab mixes.
pub fn calibrate_reference() -> Result<ImpactCoefficientTable, DataError> {
    let samples: Vec<_> = super::reference::LAB_MIXES.iter().map(|l| (l.mix, l.impacts)).collect();
    calibrate(&samples)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngredientCoefficients {
    pub gwp_per_kg: f64,
    pub ap_per_kg: f64,
    pub cbw_per_kg: f64,
}

/// Per-kg impact coefficients for each of the seven ingredients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactCoefficientTable {
    rows: [IngredientCoefficients; 7],
}

impl ImpactCoefficientTable {
    pub fn new(rows: [IngredientCoefficients; 7]) -> Result<Self, DataError> {
        let table = Self { rows };
        table.validate()?;
        Ok(table)
    }

    /// The calibrated table shipped with the crate.
    pub fn default_calibrated() -> Self {
        DEFAULT_TABLE_TEXT
            .parse()
            .expect("shipped coefficient table is valid")
    }

    pub fn get(&self, ingredient: Ingredient) -> IngredientCoefficients {
        self.rows[ingredient.index()]
    }

    pub fn rows(&self) -> &[IngredientCoefficients; 7] {
        &self.rows
    }

    fn validate(&self) -> Result<(), DataError> {
        for ingredient in Ingredient::ALL {
            let c = self.get(ingredient);
            for v in [c.gwp_per_kg, c.ap_per_kg, c.cbw_per_kg] {
                if !v.is_finite() || v < 0.0 {
                    return Err(DataError::InvalidCoefficient {
                        ingredient,
                        reason: format!("coefficient {v} must be finite and >= 0"),
                    });
                }
            }
        }
        if self.get(Ingredient::Water).cbw_per_kg <= 0.0 {
            return Err(DataError::InvalidCoefficient {
                ingredient: Ingredient::Water,
                reason: "water must carry a positive batching-water coefficient".into(),
            });
        }
        Ok(())
    }

    /// Serializes in the `name gwp ap cbw` line format accepted by [`FromStr`].
    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "# name gwp_per_kg ap_per_kg cbw_per_kg");
        for ingredient in Ingredient::ALL {
            let c = self.get(ingredient);
            let _ = writeln!(
                out,
                "{} {} {} {}",
                ingredient.name(),
                c.gwp_per_kg,
                c.ap_per_kg,
                c.cbw_per_kg
            );
        }
        out
    }
}

impl Default for ImpactCoefficientTable {
    fn default() -> Self {
        Self::default_calibrated()
    }
}

impl FromStr for ImpactCoefficientTable {
    type Err = DataError;

    /// Parses one ingredient per line: `name gwp_per_kg ap_per_kg cbw_per_kg`.
    /// `#` starts a comment. Extra trailing numeric columns are reserved for
    /// further impact categories and ignored.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut rows: [Option<IngredientCoefficients>; 7] = [None; 7];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let name = fields.next().unwrap_or_default();
            let ingredient: Ingredient = name.parse().map_err(|_| DataError::CoefficientLine {
                line: line_no,
                message: format!("unknown ingredient {name:?}"),
            })?;
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DataError::CoefficientLine {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if values.len() < 3 {
                return Err(DataError::CoefficientLine {
                    line: line_no,
                    message: format!("expected 3 coefficients, found {}", values.len()),
                });
            }
            let slot = &mut rows[ingredient.index()];
            if slot.is_some() {
                return Err(DataError::CoefficientLine {
                    line: line_no,
                    message: format!("duplicate entry for {ingredient}"),
                });
            }
            *slot = Some(IngredientCoefficients {
                gwp_per_kg: values[0],
                ap_per_kg: values[1],
                cbw_per_kg: values[2],
            });
        }
        let mut out = [IngredientCoefficients::default(); 7];
        for ingredient in Ingredient::ALL {
            out[ingredient.index()] = rows[ingredient.index()]
                .ok_or(DataError::MissingCoefficient(ingredient))?;
        }
        Self::new(out)
    }
}

/// Impacts of a mix under the linear coefficient model.
pub fn compute_impacts(mix: &MixComposition, coeffs: &ImpactCoefficientTable) -> ImpactVector {
    let mut impacts = ImpactVector::default();
    for ingredient in Ingredient::ALL {
        let mass = mix.get(ingredient);
        let c = coeffs.get(ingredient);
        impacts.gwp += mass * c.gwp_per_kg;
        impacts.ap += mass * c.ap_per_kg;
        impacts.cbw += mass * c.cbw_per_kg;
    }
    impacts
}

/// Fits a coefficient table to reference `(mix, impacts)` pairs.
///
/// Each impact column is fitted independently by minimum-norm least squares;
/// coefficients that come out negative are clamped to zero and the remaining
/// ones refitted until all are non-negative. The water batching-water
/// coefficient is fixed at [`WATER_CBW_PER_KG`] and the other ingredients
/// fit the residual.
pub fn calibrate(samples: &[(MixComposition, ImpactVector)]) -> Result<ImpactCoefficientTable, DataError> {
    if samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = samples.len();
    let design = DMatrix::from_fn(n, 7, |r, c| samples[r].0.to_array()[c]);
    let column = |k: usize| DVector::from_fn(n, |r, _| samples[r].1.to_array()[k]);

    let all: Vec<usize> = (0..7).collect();
    let gwp = clamped_min_norm(&design, &column(0), &all);
    let ap = clamped_min_norm(&design, &column(1), &all);

    let water = Ingredient::Water.index();
    let residual = DVector::from_fn(n, |r, _| {
        samples[r].1.cbw - WATER_CBW_PER_KG * samples[r].0.water
    });
    let others: Vec<usize> = all.iter().copied().filter(|&c| c != water).collect();
    let mut cbw = clamped_min_norm(&design, &residual, &others);
    cbw[water] = WATER_CBW_PER_KG;

    let mut rows = [IngredientCoefficients::default(); 7];
    for (i, row) in rows.iter_mut().enumerate() {
        *row = IngredientCoefficients {
            gwp_per_kg: gwp[i],
            ap_per_kg: ap[i],
            cbw_per_kg: cbw[i],
        };
    }
    ImpactCoefficientTable::new(rows)
}

fn clamped_min_norm(design: &DMatrix<f64>, target: &DVector<f64>, columns: &[usize]) -> [f64; 7] {
    let mut active = columns.to_vec();
    loop {
        let mut coef = [0.0; 7];
        if active.is_empty() {
            return coef;
        }
        let sub = design.select_columns(active.iter());
        let svd = sub.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let solved = svd.solve(target, tol).expect("svd computed with both factors");
        for (slot, &c) in active.iter().enumerate() {
            coef[c] = solved[slot];
        }
        let negative: Vec<usize> = active.iter().copied().filter(|&c| coef[c] < 0.0).collect();
        if negative.is_empty() {
            return coef;
        }
        active.retain(|c| !negative.contains(c));
    }
}
