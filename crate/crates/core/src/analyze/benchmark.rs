use serde::{Deserialize, Serialize};

use crate::data::reference::{GREAT_LAKES_BENCHMARKS, PSI_PER_MPA};

/// Regional GWP benchmark for a specified-strength class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub strength_psi: f64,
    /// kg CO2-eq/m³.
    pub gwp: f64,
}

pub fn default_benchmarks() -> Vec<Benchmark> {
    GREAT_LAKES_BENCHMARKS.iter().map(|&(strength_psi, gwp)| Benchmark { strength_psi, gwp }).collect()
}

/// `(benchmark − gwp) / benchmark × 100`; negative when the mix is worse.
pub fn percent_below(gwp: f64, benchmark: f64) -> f64 {
    (benchmark - gwp) / benchmark * 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub label: String,
    pub strength_mpa: f64,
    pub gwp: f64,
    pub benchmark: Option<Benchmark>,
    pub percent_below: Option<f64>,
    /// No applicable class, or GWP above the benchmark.
    pub flagged: bool,
}

/// Compares each `(label, strength MPa, gwp)` against the highest benchmark
/// class the strength satisfies.
pub fn benchmark_compare(mixes: &[(String, f64, f64)], benchmarks: &[Benchmark]) -> Vec<BenchmarkRow> {
    mixes
        .iter()
        .map(|(label, strength_mpa, gwp)| {
            // A strength converted from exactly the class value may round just below it.
            let psi = strength_mpa * PSI_PER_MPA * (1.0 + 1e-12);
            let benchmark = benchmarks
                .iter()
                .filter(|b| b.strength_psi <= psi)
                .max_by(|a, b| a.strength_psi.total_cmp(&b.strength_psi))
                .copied();
            let pct = benchmark.map(|b| percent_below(*gwp, b.gwp));
            BenchmarkRow {
                label: label.clone(),
                strength_mpa: *strength_mpa,
                gwp: *gwp,
                benchmark,
                percent_below: pct,
                flagged: pct.is_none_or(|p| p < 0.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_examples() {
        assert_eq!(percent_below(281.33, 281.33), 0.0);
        assert!(percent_below(300.0, 281.33) < 0.0);
    }

    #[test]
    fn class_selection_and_flags() {
        let mpa = |psi: f64| psi / PSI_PER_MPA;
        let rows = benchmark_compare(
            &[
                ("low".into(), mpa(2500.0), 100.0),
                ("mid".into(), mpa(3500.0), 154.111),
                ("high".into(), mpa(9000.0), 400.0),
            ],
            &default_benchmarks(),
        );
        assert!(rows[0].flagged && rows[0].benchmark.is_none());
        assert_eq!(rows[1].benchmark.unwrap().gwp, 281.33);
        assert!(!rows[1].flagged);
        assert_eq!(rows[2].benchmark.unwrap().strength_psi, 4000.0);
        assert!(rows[2].flagged);
    }

    #[test]
    fn class_boundary_survives_unit_conversion() {
        for psi in [3000.0, 4000.0] {
            let rows = benchmark_compare(&[("x".into(), psi / PSI_PER_MPA, 100.0)], &default_benchmarks());
            assert_eq!(rows[0].benchmark.unwrap().strength_psi, psi);
        }
    }
}
