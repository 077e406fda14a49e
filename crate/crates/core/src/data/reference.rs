//! Published reference mixes and regional benchmarks used for calibration
//! and comparison.

use super::{ImpactVector, MixComposition};

/// psi per MPa.
pub const PSI_PER_MPA: f64 = 145.037_737_730_209_2;

#[derive(Clone, Copy, Debug)]
pub struct LabMix {
    pub id: u8,
    /// Superplasticizer already at the field-adjusted (¼) amount.
    pub mix: MixComposition,
    pub impacts: ImpactVector,
    pub target_28d_psi: f64,
    pub measured_7d_psi: f64,
    pub measured_28d_psi: f64,
}

const fn mix(a: [f64; 7]) -> MixComposition {
    MixComposition {
        cement: a[0],
        slag: a[1],
        fly_ash: a[2],
        water: a[3],
        superplasticizer: a[4],
        coarse_aggregate: a[5],
        fine_aggregate: a[6],
    }
}

/// The five lab-tested generated mixes with their lifecycle results.
// Mix 3's fly ash is printed as "113/78" in the source table; read as 113.78.
pub const LAB_MIXES: [LabMix; 5] = [
    LabMix {
        id: 1,
        mix: mix([131.46, 201.21, 119.67, 180.70, 1.1, 950.72, 780.48]),
        impacts: ImpactVector { gwp: 154.111, ap: 0.534, cbw: 0.181 },
        target_28d_psi: 4000.0,
        measured_7d_psi: 4949.0,
        measured_28d_psi: 8013.0,
    },
    LabMix {
        id: 2,
        mix: mix([128.59, 197.46, 124.24, 184.31, 1.0, 954.48, 787.47]),
        impacts: ImpactVector { gwp: 152.284, ap: 0.530, cbw: 0.183 },
        target_28d_psi: 3000.0,
        measured_7d_psi: 4025.0,
        measured_28d_psi: 7764.0,
    },
    LabMix {
        id: 3,
        mix: mix([134.89, 182.74, 113.78, 179.43, 0.9, 953.22, 785.28]),
        impacts: ImpactVector { gwp: 157.294, ap: 0.547, cbw: 0.180 },
        target_28d_psi: 3000.0,
        measured_7d_psi: 4431.0,
        measured_28d_psi: 9136.0,
    },
    LabMix {
        id: 4,
        mix: mix([132.25, 184.37, 119.74, 181.03, 1.8, 954.10, 786.55]),
        impacts: ImpactVector { gwp: 155.157, ap: 0.549, cbw: 0.167 },
        target_28d_psi: 3000.0,
        measured_7d_psi: 4967.0,
        measured_28d_psi: 9938.0,
    },
    LabMix {
        id: 5,
        mix: mix([129.02, 210.60, 122.80, 184.63, 1.0, 953.50, 780.11]),
        impacts: ImpactVector { gwp: 152.149, ap: 0.524, cbw: 0.169 },
        target_28d_psi: 3500.0,
        measured_7d_psi: 5443.0,
        measured_28d_psi: 8836.0,
    },
];

/// Generated mixes nearest to extremal hull points at 30±1 and 40±1 MPa (7-day group).
pub const HULL_SAMPLE_MIXES: [(f64, MixComposition); 2] = [
    (30.0, mix([186.4, 236.7, 107.1, 142.3, 22.3, 901.4, 717.2])),
    (40.0, mix([259.0, 288.6, 58.8, 142.5, 26.1, 868.6, 763.0])),
];

/// Great Lakes regional GWP benchmarks, (strength class psi, kg CO₂ eq./m³).
pub const GREAT_LAKES_BENCHMARKS: [(f64, f64); 2] = [(3000.0, 281.33), (4000.0, 334.87)];
