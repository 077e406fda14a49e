//! Property predictors: impacts (GWP, AP, CBW) from a scaled mix, and one
//! compressive-strength model per age group.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AgeGroup, DataError, Feature, ImpactVector, LabeledMix, MixComposition, NormalizationStats};
use crate::nn::{adam_step, mse, Activation, AdamConfig, AdamState, Gradients, Mlp, ModelFile, NnError};
use crate::rng;

pub const MIN_TRAINING_ROWS: usize = 20;
const HIDDEN: [usize; 2] = [20, 25];

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("too few rows for {target}: {found} (need at least {MIN_TRAINING_ROWS})")]
    TooFewRows { target: Target, found: usize },
    #[error("predictions and labels differ in length ({preds} vs {labels}) or are empty")]
    Length { preds: usize, labels: usize },
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Target {
    Gwp,
    Ap,
    Cbw,
    Strength(AgeGroup),
}

impl Target {
    pub const IMPACTS: [Target; 3] = [Target::Gwp, Target::Ap, Target::Cbw];

    /// Impact targets followed by the six strength targets.
    pub fn all() -> Vec<Target> {
        Self::IMPACTS
            .into_iter()
            .chain(AgeGroup::ALL.into_iter().map(Target::Strength))
            .collect()
    }

    pub fn feature(self) -> Feature {
        match self {
            Target::Gwp => Feature::Gwp,
            Target::Ap => Feature::Ap,
            Target::Cbw => Feature::Cbw,
            Target::Strength(_) => Feature::Strength,
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Target::Gwp => ImpactVector::UNITS[0],
            Target::Ap => ImpactVector::UNITS[1],
            Target::Cbw => ImpactVector::UNITS[2],
            Target::Strength(_) => "MPa",
        }
    }

    pub fn age_group(self) -> Option<AgeGroup> {
        match self {
            Target::Strength(g) => Some(g),
            _ => None,
        }
    }

    pub fn label_of(self, row: &LabeledMix) -> f64 {
        match self {
            Target::Gwp => row.impacts.gwp,
            Target::Ap => row.impacts.ap,
            Target::Cbw => row.impacts.cbw,
            Target::Strength(_) => row.strength,
        }
    }

    /// Whether `row` belongs to this target's training population.
    pub fn accepts(self, row: &LabeledMix) -> bool {
        self.age_group().is_none_or(|g| row.age_group() == g)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Gwp => f.write_str("gwp"),
            Target::Ap => f.write_str("ap"),
            Target::Cbw => f.write_str("cbw"),
            Target::Strength(g) => write!(f, "strength_{}", g.label()),
        }
    }
}

impl FromStr for Target {
    type Err = PredictError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gwp" => Ok(Target::Gwp),
            "ap" => Ok(Target::Ap),
            "cbw" => Ok(Target::Cbw),
            other => other
                .strip_prefix("strength_")
                .and_then(|g| g.parse().ok())
                .map(Target::Strength)
                .ok_or_else(|| PredictError::UnknownTarget(s.to_string())),
        }
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Target {
    type Error = PredictError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the labels have zero variance.
    pub r2: Option<f64>,
}

/// MAE, RMSE and `R² = 1 − SSE/SST`.
pub fn evaluate(preds: &[f64], labels: &[f64]) -> Result<RegressionMetrics, PredictError> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(PredictError::Length { preds: preds.len(), labels: labels.len() });
    }
    let n = preds.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    let (mut abs, mut sse, mut sst) = (0.0, 0.0, 0.0);
    for (p, y) in preds.iter().zip(labels) {
        let e = p - y;
        abs += e.abs();
        sse += e * e;
        sst += (y - mean) * (y - mean);
    }
    let mae = abs / n;
    // Guard the identity RMSE ≥ MAE against last-bit rounding.
    let rmse = (sse / n).sqrt().max(mae);
    let constant = labels.iter().all(|y| *y == labels[0]);
    let r2 = (!constant && sst > 0.0).then(|| 1.0 - sse / sst);
    Ok(RegressionMetrics { n: preds.len(), mae, rmse, r2 })
}

/// Index sets of a seeded split stratified by age group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn stratified_split(rows: &[LabeledMix], test_fraction: f64, seed: u64) -> Result<Split, PredictError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(PredictError::Config(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for group in AgeGroup::ALL {
        let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].age_group() == group).collect();
        idx.shuffle(&mut rng::substream(seed, "split", group.index() as u64));
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { seed, test_fraction, train, test })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { epochs: 500, batch_size: 10, learning_rate: 0.001, seed: 0, test_fraction: 0.2 }
    }
}

/// A scaled training pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub x: [f64; 7],
    pub y: f64,
}

fn samples(stats: &NormalizationStats, target: Target, rows: &[LabeledMix]) -> Vec<Sample> {
    rows.iter()
        .map(|r| Sample {
            x: stats.normalize_mix(&r.mix).values.try_into().expect("seven masses"),
            y: stats.normalize_value(target.feature(), target.label_of(r)).0,
        })
        .collect()
}

/// Mean squared error over a batch and its parameter gradients.
pub fn batch_loss(net: &Mlp, batch: &[Sample]) -> Result<(f64, Gradients), PredictError> {
    let mut grads = Gradients::zeros_like(net);
    let b = batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let (out, cache) = net.forward(&s.x)?;
        let (loss, mut g) = mse(&out, &[s.y])?;
        g[0] /= b;
        total += loss;
        net.backward_accumulate(&cache, &g, &mut grads)?;
    }
    Ok((total / b, grads))
}

/// Anything that maps a scaled mix to a scaled target.
pub trait Regressor {
    fn predict_scaled(&self, x: &[f64; 7]) -> f64;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub target: Target,
    net: Mlp,
    stats: NormalizationStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    /// Set when a mass fell outside the training range or the mix is empty.
    pub out_of_domain: bool,
}

impl Regressor for PredictorModel {
    fn predict_scaled(&self, x: &[f64; 7]) -> f64 {
        self.net.predict(x).map(|o| o[0]).unwrap_or(f64::NAN)
    }
}

impl PredictorModel {
    pub fn new(target: Target, net: Mlp, stats: NormalizationStats) -> Result<Self, PredictError> {
        if net.input_dim() != 7 || net.output_dim() != 1 {
            return Err(NnError::Shape(format!("{target} network must map 7 inputs to 1 output")).into());
        }
        Ok(Self { target, net, stats })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    /// Prediction in the target's physical units.
    pub fn predict(&self, mix: &MixComposition) -> Prediction {
        let scaled = self.stats.normalize_mix(mix);
        let x: [f64; 7] = scaled.values.as_slice().try_into().expect("seven masses");
        let value = self.stats.denormalize_value(self.target.feature(), self.predict_scaled(&x));
        Prediction { value, out_of_domain: scaled.is_clamped() || mix.total_mass() == 0.0 }
    }
}

/// Held-out metrics for one target, in physical and scaled units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: Target,
    pub units: String,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub physical: RegressionMetrics,
    pub normalized: RegressionMetrics,
    /// Training-set MAE in physical units.
    pub train_mae: f64,
}

fn metrics_for<R: Regressor + ?Sized>(
    model: &R,
    target: Target,
    stats: &NormalizationStats,
    test: &[Sample],
) -> Result<(RegressionMetrics, RegressionMetrics), PredictError> {
    let feature = target.feature();
    let scaled: Vec<f64> = test.iter().map(|s| model.predict_scaled(&s.x)).collect();
    let labels: Vec<f64> = test.iter().map(|s| s.y).collect();
    let phys = |v: &[f64]| v.iter().map(|&t| stats.denormalize_value(feature, t)).collect::<Vec<_>>();
    Ok((evaluate(&phys(&scaled), &phys(&labels))?, evaluate(&scaled, &labels)?))
}

fn partition(rows: &[LabeledMix], target: Target, split: &Split) -> (Vec<LabeledMix>, Vec<LabeledMix>) {
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i]).filter(|r| target.accepts(r)).collect::<Vec<_>>();
    (pick(&split.train), pick(&split.test))
}

/// Trains one predictor on the split's training rows for `target` and
/// reports metrics on its held-out rows.
pub fn train_predictor(
    rows: &[LabeledMix],
    stats: &NormalizationStats,
    target: Target,
    split: &Split,
    config: &PredictorConfig,
) -> Result<(PredictorModel, TargetMetrics), PredictError> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(PredictError::Config("epochs and batch_size must be >= 1".into()));
    }
    let (train_rows, test_rows) = partition(rows, target, split);
    if train_rows.len() + test_rows.len() < MIN_TRAINING_ROWS || train_rows.is_empty() || test_rows.is_empty() {
        return Err(PredictError::TooFewRows { target, found: train_rows.len() + test_rows.len() });
    }
    let train_set = samples(stats, target, &train_rows);
    let test_set = samples(stats, target, &test_rows);

    let label = format!("predict/{target}");
    let mut init = rng::stream(config.seed, &format!("{label}/init"));
    let mut shuffle = rng::stream(config.seed, &format!("{label}/shuffle"));
    let mut net = Mlp::glorot(
        &[7, HIDDEN[0], HIDDEN[1], 1],
        &[Activation::Relu, Activation::Relu, Activation::Identity],
        &mut init,
    )?;
    let mut adam = AdamState::new(&net, AdamConfig { lr: config.learning_rate, ..AdamConfig::default() });
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let (loss, grads) = batch_loss(&net, &batch)?;
            if !loss.is_finite() {
                return Err(NnError::NonFinite(format!("{target} training loss")).into());
            }
            adam_step(&mut net, &grads, &mut adam)?;
        }
    }
    let model = PredictorModel::new(target, net, stats.clone())?;
    let (physical, normalized) = metrics_for(&model, target, stats, &test_set)?;
    let (train_physical, _) = metrics_for(&model, target, stats, &train_set)?;
    let metrics = TargetMetrics {
        target,
        units: target.units().to_string(),
        split_seed: split.seed,
        n_train: train_set.len(),
        n_test: test_set.len(),
        physical,
        normalized,
        train_mae: train_physical.mae,
    };
    Ok((model, metrics))
}

/// Impact scores plus per-group strength for a mix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub strength: f64,
    pub impacts: ImpactVector,
    pub out_of_domain: bool,
}

/// The three impact predictors and six strength predictors.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorSet {
    pub models: BTreeMap<Target, PredictorModel>,
}

impl PredictorSet {
    /// Trains all nine predictors in parallel on one shared split.
    pub fn train(
        rows: &[LabeledMix],
        stats: &NormalizationStats,
        config: &PredictorConfig,
    ) -> Result<(Self, Split, Vec<TargetMetrics>), PredictError> {
        let split = stratified_split(rows, config.test_fraction, config.seed)?;
        let results: Vec<(PredictorModel, TargetMetrics)> = Target::all()
            .par_iter()
            .map(|&t| train_predictor(rows, stats, t, &split, config))
            .collect::<Result<_, _>>()?;
        let mut models = BTreeMap::new();
        let mut metrics = Vec::new();
        for (m, r) in results {
            models.insert(m.target, m);
            metrics.push(r);
        }
        Ok((Self { models }, split, metrics))
    }

    pub fn get(&self, target: Target) -> Option<&PredictorModel> {
        self.models.get(&target)
    }

    pub fn score(&self, mix: &MixComposition, group: AgeGroup) -> Result<Score, PredictError> {
        let mut out_of_domain = false;
        let mut value = |t: Target| -> Result<f64, PredictError> {
            let m = self.models.get(&t).ok_or_else(|| PredictError::UnknownTarget(t.to_string()))?;
            let p = m.predict(mix);
            out_of_domain |= p.out_of_domain;
            Ok(p.value)
        };
        let impacts = ImpactVector::new(value(Target::Gwp)?, value(Target::Ap)?, value(Target::Cbw)?);
        let strength = value(Target::Strength(group))?;
        Ok(Score { strength, impacts, out_of_domain })
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut file = ModelFile::default();
        for (t, m) in &self.models {
            file.push(t.to_string(), m.net.clone());
        }
        file
    }

    pub fn from_model_file(mut file: ModelFile, stats: &NormalizationStats) -> Result<Self, PredictError> {
        let mut models = BTreeMap::new();
        for t in Target::all() {
            models.insert(t, PredictorModel::new(t, file.take(&t.to_string())?, stats.clone())?);
        }
        Ok(Self { models })
    }
}

/// Ordinary least squares with an intercept, solved by SVD.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBaseline {
    pub intercept: f64,
    pub weights: [f64; 7],
}

impl LinearBaseline {
    pub fn fit(data: &[Sample]) -> Result<Self, PredictError> {
        if data.is_empty() {
            return Err(PredictError::Length { preds: 0, labels: 0 });
        }
        let a = DMatrix::from_fn(data.len(), 8, |i, j| if j == 0 { 1.0 } else { data[i].x[j - 1] });
        let b = DVector::from_iterator(data.len(), data.iter().map(|s| s.y));
        let svd = a.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max();
        let beta = svd.solve(&b, tol).map_err(|e| PredictError::Config(e.to_string()))?;
        Ok(Self { intercept: beta[0], weights: std::array::from_fn(|j| beta[j + 1]) })
    }
}

impl Regressor for LinearBaseline {
    fn predict_scaled(&self, x: &[f64; 7]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Depth-limited CART regression tree (variance-reduction splits).
#[derive(Clone, Debug, PartialEq)]
pub struct TreeBaseline {
    root: Node,
}

impl TreeBaseline {
    pub fn fit(data: &[Sample], max_depth: usize, min_leaf: usize) -> Result<Self, PredictError> {
        if data.is_empty() {
            return Err(PredictError::Length { preds: 0, labels: 0 });
        }
        let mut idx: Vec<usize> = (0..data.len()).collect();
        Ok(Self { root: grow(data, &mut idx, max_depth, min_leaf.max(1)) })
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

fn grow(data: &[Sample], idx: &mut [usize], depth: usize, min_leaf: usize) -> Node {
    let n = idx.len();
    let mean = idx.iter().map(|&i| data[i].y).sum::<f64>() / n as f64;
    if depth == 0 || n < 2 * min_leaf {
        return Node::Leaf(mean);
    }
    let total_sq: f64 = idx.iter().map(|&i| (data[i].y - mean).powi(2)).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..7 {
        idx.sort_by(|&a, &b| data[a].x[f].total_cmp(&data[b].x[f]).then(a.cmp(&b)));
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        let sum_all: f64 = idx.iter().map(|&i| data[i].y).sum();
        let sq_all: f64 = idx.iter().map(|&i| data[i].y * data[i].y).sum();
        for k in 0..n - 1 {
            let y = data[idx[k]].y;
            sum_l += y;
            sq_l += y * y;
            let nl = k + 1;
            let (xl, xr) = (data[idx[k]].x[f], data[idx[k + 1]].x[f]);
            if nl < min_leaf || n - nl < min_leaf || xl == xr {
                continue;
            }
            let sse_l = sq_l - sum_l * sum_l / nl as f64;
            let (sum_r, sq_r) = (sum_all - sum_l, sq_all - sq_l);
            let sse_r = sq_r - sum_r * sum_r / (n - nl) as f64;
            let sse = sse_l + sse_r;
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, f, 0.5 * (xl + xr)));
            }
        }
    }
    match best {
        Some((sse, feature, threshold)) if sse < total_sq => {
            let mut left: Vec<usize> = idx.iter().copied().filter(|&i| data[i].x[feature] <= threshold).collect();
            let mut right: Vec<usize> = idx.iter().copied().filter(|&i| data[i].x[feature] > threshold).collect();
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(data, &mut left, depth - 1, min_leaf)),
                right: Box::new(grow(data, &mut right, depth - 1, min_leaf)),
            }
        }
        _ => Node::Leaf(mean),
    }
}

impl Regressor for TreeBaseline {
    fn predict_scaled(&self, x: &[f64; 7]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Linear,
    Tree,
}

/// Fits a baseline on the same split as the network and reports held-out metrics.
pub fn evaluate_baseline(
    kind: BaselineKind,
    rows: &[LabeledMix],
    stats: &NormalizationStats,
    target: Target,
    split: &Split,
) -> Result<TargetMetrics, PredictError> {
    let (train_rows, test_rows) = partition(rows, target, split);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(PredictError::TooFewRows { target, found: train_rows.len() + test_rows.len() });
    }
    let train_set = samples(stats, target, &train_rows);
    let test_set = samples(stats, target, &test_rows);
    let model: Box<dyn Regressor> = match kind {
        BaselineKind::Linear => Box::new(LinearBaseline::fit(&train_set)?),
        BaselineKind::Tree => Box::new(TreeBaseline::fit(&train_set, 6, 5)?),
    };
    let (physical, normalized) = metrics_for(model.as_ref(), target, stats, &test_set)?;
    let (train_physical, _) = metrics_for(model.as_ref(), target, stats, &train_set)?;
    Ok(TargetMetrics {
        target,
        units: target.units().to_string(),
        split_seed: split.seed,
        n_train: train_set.len(),
        n_test: test_set.len(),
        physical,
        normalized,
        train_mae: train_physical.mae,
    })
}
