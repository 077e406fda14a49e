use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    compute_impacts, DataError, ImpactCoefficientTable, Ingredient, LabeledMix, MixComposition,
    NormalizationStats,
};

/// Canonical UCI column order.
pub const DATASET_COLUMNS: [&str; 9] = [
    "cement",
    "blast_furnace_slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
    "age",
    "compressive_strength",
];

/// A rejected CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub rows: Vec<LabeledMix>,
    pub stats: NormalizationStats,
    pub rejected: Vec<RowError>,
    /// Hex SHA-256 of the source bytes.
    pub checksum: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads the nine-column concrete CSV and attaches impacts from `coeffs`.
///
/// Rows that fail to parse or violate mix invariants are skipped and listed
/// in [`Dataset::rejected`]; a file with no accepted rows is an error.
pub fn load_dataset<R: Read>(mut source: R, coeffs: &ImpactCoefficientTable) -> Result<Dataset, DataError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let checksum = sha256_hex(&bytes);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());

    let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    if headers.iter().all(str::is_empty) {
        return Err(DataError::EmptyDataset);
    }
    validate_header(&headers)?;

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for record in reader.records() {
        match record {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                match parse_row(&record, coeffs) {
                    Ok(row) => rows.push(row),
                    Err(message) => rejected.push(RowError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                rejected.push(RowError { line, message: e.to_string() });
            }
        }
    }
    for r in &rejected {
        log::warn!("rejected dataset line {}: {}", r.line, r.message);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let stats = NormalizationStats::from_rows(&rows)?;
    Ok(Dataset { rows, stats, rejected, checksum })
}

fn validate_header(headers: &csv::StringRecord) -> Result<(), DataError> {
    let found: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if found.len() != DATASET_COLUMNS.len() || found.iter().zip(DATASET_COLUMNS).any(|(a, b)| a != b) {
        return Err(DataError::Header {
            expected: DATASET_COLUMNS.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_row(record: &csv::StringRecord, coeffs: &ImpactCoefficientTable) -> Result<LabeledMix, String> {
    if record.len() != DATASET_COLUMNS.len() {
        return Err(format!("expected {} columns, found {}", DATASET_COLUMNS.len(), record.len()));
    }
    let mut values = [0.0; 9];
    for (i, field) in record.iter().enumerate() {
        values[i] = field
            .parse::<f64>()
            .map_err(|_| format!("column {} is not numeric: {field:?}", DATASET_COLUMNS[i]))?;
        if !values[i].is_finite() {
            return Err(format!("column {} is not finite", DATASET_COLUMNS[i]));
        }
    }
    let mut masses = [0.0; 7];
    masses.copy_from_slice(&values[..7]);
    let mix = MixComposition::from_array(masses);
    mix.validate_row().map_err(|e| e.to_string())?;

    let age = values[7];
    if age < 1.0 || age.fract() != 0.0 || age > f64::from(u32::MAX) {
        return Err(format!("age must be a positive whole number of days, found {age}"));
    }
    let strength = values[8];
    if strength <= 0.0 {
        return Err(format!("compressive strength must be > 0, found {strength}"));
    }
    Ok(LabeledMix {
        mix,
        age_days: age as u32,
        strength,
        impacts: compute_impacts(&mix, coeffs),
    })
}

impl Dataset {
    pub fn ingredient_column(&self, ingredient: Ingredient) -> Vec<f64> {
        self.rows.iter().map(|r| r.mix.get(ingredient)).collect()
    }
}
