//! A trained model directory: the CVAE, nine predictors, the training data
//! and coefficients they were fit on, and a metadata sidecar tying them
//! together by checksum.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cvae::{self, CvaeError, CvaeModel, EpochLoss, TrainConfig};
use crate::data::{load_dataset, sha256_hex, AgeGroup, DataError, Dataset, ImpactCoefficientTable, MixComposition, NormalizationStats};
use crate::nn::{ModelFile, NnError};
use crate::predict::{evaluate_baseline, BaselineKind, PredictError, PredictorConfig, PredictorSet, Score, Target, TargetMetrics};

pub const BUNDLE_FORMAT: &str = "mixgen-bundle 1";
pub const CVAE_FILE: &str = "cvae.model";
pub const PREDICTORS_FILE: &str = "predictors.model";
pub const METADATA_FILE: &str = "metadata.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.txt";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Cvae(#[from] CvaeError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("model directory is inconsistent: {0}")]
    Mismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub test_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format: String,
    pub tool_version: String,
    pub seed: u64,
    pub cvae: TrainConfig,
    pub predictors: PredictorConfig,
    /// Set when the KL term was weighted by anything other than 1.
    pub kl_weight_note: Option<String>,
    pub stats: NormalizationStats,
    pub dataset_sha256: String,
    pub coefficients_sha256: String,
    pub dataset_rows: usize,
    pub rejected_rows: usize,
    pub split: SplitSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub kind: BaselineKind,
    pub metrics: TargetMetrics,
}

/// Held-out metrics for the nine network predictors plus baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split_seed: u64,
    pub test_fraction: f64,
    pub impact: Vec<TargetMetrics>,
    pub strength: Vec<TargetMetrics>,
    pub baselines: Vec<BaselineMetrics>,
}

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub cvae: CvaeModel,
    pub predictors: PredictorSet,
    pub metadata: ModelMetadata,
    pub dataset: Dataset,
    pub coefficients: ImpactCoefficientTable,
    dataset_bytes: Vec<u8>,
    coefficients_text: String,
}

#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub loss_history: Vec<EpochLoss>,
    pub metrics: MetricsReport,
}

impl ModelBundle {
    /// Trains the CVAE and all predictors from raw dataset and coefficient text.
    /// `seed` overrides the seeds inside both configs.
    pub fn train(
        dataset_bytes: Vec<u8>,
        coefficients_text: String,
        mut cvae_config: TrainConfig,
        mut predictor_config: PredictorConfig,
        seed: u64,
    ) -> Result<(Self, TrainingReport), BundleError> {
        let coefficients: ImpactCoefficientTable = coefficients_text.parse()?;
        let dataset = load_dataset(dataset_bytes.as_slice(), &coefficients)?;
        cvae_config.seed = seed;
        predictor_config.seed = seed;

        let examples = cvae::training_examples(&dataset.stats, &dataset.rows);
        let (cvae, loss_history) = cvae::train(&examples, dataset.stats.clone(), &cvae_config)?;
        let (predictors, split, metrics) = PredictorSet::train(&dataset.rows, &dataset.stats, &predictor_config)?;

        let mut baselines = Vec::new();
        for kind in [BaselineKind::Linear, BaselineKind::Tree] {
            for t in Target::all() {
                let metrics = evaluate_baseline(kind, &dataset.rows, &dataset.stats, t, &split)?;
                baselines.push(BaselineMetrics { kind, metrics });
            }
        }
        let (impact, strength) = metrics.into_iter().partition(|m| m.target.age_group().is_none());
        let report = MetricsReport { split_seed: split.seed, test_fraction: split.test_fraction, impact, strength, baselines };

        let metadata = ModelMetadata {
            format: BUNDLE_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            cvae: cvae_config,
            predictors: predictor_config,
            kl_weight_note: (cvae_config.kl_weight != 1.0)
                .then(|| format!("KL term weighted by {} instead of 1", cvae_config.kl_weight)),
            stats: dataset.stats.clone(),
            dataset_sha256: dataset.checksum.clone(),
            coefficients_sha256: sha256_hex(coefficients_text.as_bytes()),
            dataset_rows: dataset.rows.len(),
            rejected_rows: dataset.rejected.len(),
            split: SplitSummary {
                seed: split.seed,
                test_fraction: split.test_fraction,
                n_train: split.train.len(),
                n_test: split.test.len(),
            },
        };
        let bundle = Self { cvae, predictors, metadata, dataset, coefficients, dataset_bytes, coefficients_text };
        Ok((bundle, TrainingReport { loss_history, metrics: report }))
    }

    /// Writes every artifact into `dir` (created if missing) and returns their paths.
    pub fn save(&self, dir: &Path, report: &TrainingReport) -> Result<Vec<PathBuf>, BundleError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut loss = String::from("epoch,loss,reconstruction,kl\n");
        for e in &report.loss_history {
            loss.push_str(&format!("{},{:?},{:?},{:?}\n", e.epoch, e.loss, e.reconstruction, e.kl));
        }
        let files: Vec<(&str, Vec<u8>)> = vec![
            (CVAE_FILE, self.cvae.to_model_file().to_text().into_bytes()),
            (PREDICTORS_FILE, self.predictors.to_model_file().to_text().into_bytes()),
            (METADATA_FILE, to_json(&self.metadata)),
            (METRICS_FILE, to_json(&report.metrics)),
            (LOSS_FILE, loss.into_bytes()),
            (DATASET_FILE, self.dataset_bytes.clone()),
            (COEFFICIENTS_FILE, self.coefficients_text.clone().into_bytes()),
        ];
        let mut written = Vec::new();
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }

    /// Loads a model directory, checking the data files against the sidecar checksums.
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let read = |name: &str| -> Result<Vec<u8>, BundleError> {
            let path = dir.join(name);
            fs::read(&path).map_err(io_err(&path))
        };
        let meta_path = dir.join(METADATA_FILE);
        let metadata: ModelMetadata = serde_json::from_slice(&read(METADATA_FILE)?)
            .map_err(|source| BundleError::Json { path: meta_path, source })?;
        if metadata.format != BUNDLE_FORMAT {
            return Err(BundleError::Mismatch(format!("unsupported bundle format {:?}", metadata.format)));
        }
        let dataset_bytes = read(DATASET_FILE)?;
        if sha256_hex(&dataset_bytes) != metadata.dataset_sha256 {
            return Err(BundleError::Mismatch("dataset checksum differs from metadata".into()));
        }
        let coefficients_text = String::from_utf8(read(COEFFICIENTS_FILE)?)
            .map_err(|_| BundleError::Mismatch("coefficient file is not UTF-8".into()))?;
        if sha256_hex(coefficients_text.as_bytes()) != metadata.coefficients_sha256 {
            return Err(BundleError::Mismatch("coefficient checksum differs from metadata".into()));
        }
        let coefficients: ImpactCoefficientTable = coefficients_text.parse()?;
        let dataset = load_dataset(dataset_bytes.as_slice(), &coefficients)?;
        if dataset.stats != metadata.stats {
            return Err(BundleError::Mismatch("normalization stats differ from metadata".into()));
        }
        let text = |name: &str| -> Result<String, BundleError> {
            String::from_utf8(read(name)?).map_err(|_| BundleError::Mismatch(format!("{name} is not UTF-8")))
        };
        let cvae = CvaeModel::from_model_file(ModelFile::parse(&text(CVAE_FILE)?)?, metadata.stats.clone())?;
        let predictors = PredictorSet::from_model_file(ModelFile::parse(&text(PREDICTORS_FILE)?)?, &metadata.stats)?;
        Ok(Self { cvae, predictors, metadata, dataset, coefficients, dataset_bytes, coefficients_text })
    }

    pub fn score(&self, mix: &MixComposition, group: AgeGroup) -> Result<Score, BundleError> {
        Ok(self.predictors.score(mix, group)?)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}
