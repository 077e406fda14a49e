//! Benchmarks only; see `benches/`.

use mixgen_core::data::{load_dataset, Dataset, ImpactCoefficientTable};

/// The bundled dataset, scored with the shipped coefficients.
pub fn canonical() -> Dataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/concrete.csv");
    let file = std::fs::File::open(path).expect("bundled dataset");
    load_dataset(file, &ImpactCoefficientTable::default_calibrated()).expect("bundled dataset loads")
}
