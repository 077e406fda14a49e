use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AgeGroup, DataError};

/// Lower/upper bound on the total mass of a dataset row, in kg/m³.
pub const TOTAL_MASS_BAND: (f64, f64) = (1000.0, 3500.0);

/// The seven mix constituents, in canonical column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ingredient {
    Cement,
    Slag,
    FlyAsh,
    Water,
    Superplasticizer,
    CoarseAggregate,
    FineAggregate,
}

impl Ingredient {
    pub const ALL: [Ingredient; 7] = [
        Ingredient::Cement,
        Ingredient::Slag,
        Ingredient::FlyAsh,
        Ingredient::Water,
        Ingredient::Superplasticizer,
        Ingredient::CoarseAggregate,
        Ingredient::FineAggregate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name used in coefficient tables and JSON bodies.
    pub fn name(self) -> &'static str {
        match self {
            Ingredient::Cement => "cement",
            Ingredient::Slag => "slag",
            Ingredient::FlyAsh => "fly_ash",
            Ingredient::Water => "water",
            Ingredient::Superplasticizer => "superplasticizer",
            Ingredient::CoarseAggregate => "coarse_aggregate",
            Ingredient::FineAggregate => "fine_aggregate",
        }
    }

    /// Column name in the UCI-layout CSV.
    pub fn column(self) -> &'static str {
        match self {
            Ingredient::Slag => "blast_furnace_slag",
            other => other.name(),
        }
    }
}

impl fmt::Display for Ingredient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ingredient {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Ingredient::ALL
            .into_iter()
            .find(|i| i.name() == lower || i.column() == lower)
            .ok_or_else(|| DataError::UnknownIngredient(s.to_string()))
    }
}

/// Constituent masses of one cubic meter of concrete, kg/m³.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MixComposition {
    pub cement: f64,
    #[serde(alias = "blast_furnace_slag")]
    pub slag: f64,
    pub fly_ash: f64,
    pub water: f64,
    pub superplasticizer: f64,
    pub coarse_aggregate: f64,
    pub fine_aggregate: f64,
}

impl MixComposition {
    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            cement: a[0],
            slag: a[1],
            fly_ash: a[2],
            water: a[3],
            superplasticizer: a[4],
            coarse_aggregate: a[5],
            fine_aggregate: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.cement,
            self.slag,
            self.fly_ash,
            self.water,
            self.superplasticizer,
            self.coarse_aggregate,
            self.fine_aggregate,
        ]
    }

    pub fn get(&self, ingredient: Ingredient) -> f64 {
        self.to_array()[ingredient.index()]
    }

    pub fn total_mass(&self) -> f64 {
        self.to_array().iter().sum()
    }

    pub fn cementitious_total(&self) -> f64 {
        self.cement + self.slag + self.fly_ash
    }

    /// Cement, slag and fly-ash shares of the cementitious total, or `None`
    /// when there is no cementitious material.
    pub fn cementitious_fractions(&self) -> Option<[f64; 3]> {
        let total = self.cementitious_total();
        (total > 0.0).then(|| [self.cement / total, self.slag / total, self.fly_ash / total])
    }

    pub fn with_superplasticizer_scale(mut self, scale: f64) -> Self {
        self.superplasticizer *= scale;
        self
    }

    /// Every mass finite and non-negative.
    pub fn validate(&self) -> Result<(), DataError> {
        for ingredient in Ingredient::ALL {
            let v = self.get(ingredient);
            if !v.is_finite() || v < 0.0 {
                return Err(DataError::InvalidMass { ingredient, value: v });
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the dataset sanity band on total mass.
    pub fn validate_row(&self) -> Result<(), DataError> {
        self.validate()?;
        let total = self.total_mass();
        if !(TOTAL_MASS_BAND.0..=TOTAL_MASS_BAND.1).contains(&total) {
            return Err(DataError::TotalMassOutOfBand(total));
        }
        Ok(())
    }
}

/// Environmental impacts of one cubic meter of concrete.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    /// kg CO₂ eq. per m³
    pub gwp: f64,
    /// kg SO₂ eq. per m³
    pub ap: f64,
    /// m³ batching water per m³
    pub cbw: f64,
}

impl ImpactVector {
    pub const UNITS: [&'static str; 3] = ["kg CO2 eq./m3", "kg SO2 eq./m3", "m3"];

    pub fn new(gwp: f64, ap: f64, cbw: f64) -> Self {
        Self { gwp, ap, cbw }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.gwp, self.ap, self.cbw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// A dataset row: a mix with its curing age, measured strength, and impacts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMix {
    pub mix: MixComposition,
    pub age_days: u32,
    /// Compressive strength, MPa.
    pub strength: f64,
    pub impacts: ImpactVector,
}

impl LabeledMix {
    pub fn age_group(&self) -> AgeGroup {
        AgeGroup::from_days(self.age_days)
    }
}
