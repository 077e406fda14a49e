//! Conditional variational autoencoder over mix compositions.
//!
//! The encoder maps a condition `x` and a scaled mix `y` to a diagonal
//! Gaussian over a 2-D latent code; the decoder maps `(x, z)` back to a scaled
//! mix through a sigmoid output. Training minimizes reconstruction MSE plus a
//! weighted KL divergence to the `N(0, I)` prior, with one reparameterized
//! noise draw per row per step.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AgeGroup, DataError, Feature, ImpactVector, LabeledMix, MixComposition, NormalizationStats};
use crate::nn::{adam_step, mse, Activation, AdamConfig, AdamState, Gradients, Mlp, ModelFile, NnError};
use crate::rng;

pub const LATENT_DIM: usize = 2;
pub const MIX_DIM: usize = 7;
/// Strength, three impacts, and a six-slot age one-hot.
pub const CONDITION_DIM: usize = 10;

const ENCODER_HIDDEN: [usize; 2] = [25, 20];
const DECODER_HIDDEN: [usize; 2] = [20, 25];
const GENERATION_CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum CvaeError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("conditioning value {name} = {value} outside [0, 1]")]
    Condition { name: &'static str, value: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize, history: Vec<EpochLoss> },
}

/// Side information for generation, scaled to `[0, 1]` with the training stats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningVector {
    pub strength: f64,
    pub gwp: f64,
    pub ap: f64,
    pub cbw: f64,
    pub age_group: AgeGroup,
}

impl ConditioningVector {
    pub fn new(strength: f64, impacts: [f64; 3], age_group: AgeGroup) -> Result<Self, CvaeError> {
        let c = Self { strength, gwp: impacts[0], ap: impacts[1], cbw: impacts[2], age_group };
        c.validate()?;
        Ok(c)
    }

    /// Builds a condition from physical targets, clamping out-of-range values.
    pub fn from_physical(
        stats: &NormalizationStats,
        strength_mpa: f64,
        impacts: &ImpactVector,
        age_group: AgeGroup,
    ) -> (Self, bool) {
        let (s, c0) = stats.normalize_value(Feature::Strength, strength_mpa);
        let (g, c1) = stats.normalize_value(Feature::Gwp, impacts.gwp);
        let (a, c2) = stats.normalize_value(Feature::Ap, impacts.ap);
        let (w, c3) = stats.normalize_value(Feature::Cbw, impacts.cbw);
        (Self { strength: s, gwp: g, ap: a, cbw: w, age_group }, c0 || c1 || c2 || c3)
    }

    pub fn of_row(stats: &NormalizationStats, row: &LabeledMix) -> Self {
        Self::from_physical(stats, row.strength, &row.impacts, row.age_group()).0
    }

    /// Strength (MPa) and impacts in physical units.
    pub fn to_physical(&self, stats: &NormalizationStats) -> (f64, ImpactVector) {
        (
            stats.denormalize_value(Feature::Strength, self.strength),
            ImpactVector::new(
                stats.denormalize_value(Feature::Gwp, self.gwp),
                stats.denormalize_value(Feature::Ap, self.ap),
                stats.denormalize_value(Feature::Cbw, self.cbw),
            ),
        )
    }

    pub fn validate(&self) -> Result<(), CvaeError> {
        for (name, value) in [("strength", self.strength), ("gwp", self.gwp), ("ap", self.ap), ("cbw", self.cbw)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CvaeError::Condition { name, value });
            }
        }
        Ok(())
    }

    pub fn to_input(&self) -> [f64; CONDITION_DIM] {
        let mut v = [0.0; CONDITION_DIM];
        v[..4].copy_from_slice(&[self.strength, self.gwp, self.ap, self.cbw]);
        v[4..].copy_from_slice(&self.age_group.one_hot());
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub [f64; LATENT_DIM]);

/// `z = μ + exp(logvar / 2) ⊙ ε`.
pub fn reparameterize(mean: &[f64; 2], logvar: &[f64; 2], noise: &[f64; 2]) -> LatentCode {
    LatentCode(std::array::from_fn(|j| mean[j] + (0.5 * logvar[j]).exp() * noise[j]))
}

/// `KL(N(μ, diag(exp(logvar))) ‖ N(0, I))` in closed form.
pub fn kl_divergence(mean: &[f64; 2], logvar: &[f64; 2]) -> f64 {
    -0.5 * mean
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// One scaled training pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingExample {
    pub x: [f64; CONDITION_DIM],
    pub y: [f64; MIX_DIM],
}

impl TrainingExample {
    pub fn new(condition: &ConditioningVector, mix: [f64; MIX_DIM]) -> Self {
        Self { x: condition.to_input(), y: mix }
    }

    pub fn from_row(stats: &NormalizationStats, row: &LabeledMix) -> Self {
        let y = stats.normalize_mix(&row.mix).values;
        Self::new(&ConditioningVector::of_row(stats, row), y.try_into().expect("seven scaled masses"))
    }
}

pub fn training_examples(stats: &NormalizationStats, rows: &[LabeledMix]) -> Vec<TrainingExample> {
    rows.iter().map(|r| TrainingExample::from_row(stats, r)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub kl_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 500, batch_size: 10, learning_rate: 0.001, seed: 0, kl_weight: 1.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CvaeError> {
        if self.epochs == 0 {
            return Err(CvaeError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(CvaeError::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.kl_weight >= 0.0) {
            return Err(CvaeError::Config("learning_rate and kl_weight must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-row objective (reconstruction + weighted KL).
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Gradients for the four networks of a [`CvaeModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct CvaeGradients {
    pub encoder: Gradients,
    pub mean_head: Gradients,
    pub logvar_head: Gradients,
    pub decoder: Gradients,
}

impl CvaeGradients {
    fn zeros_like(model: &CvaeModel) -> Self {
        Self {
            encoder: Gradients::zeros_like(&model.encoder),
            mean_head: Gradients::zeros_like(&model.mean_head),
            logvar_head: Gradients::zeros_like(&model.logvar_head),
            decoder: Gradients::zeros_like(&model.decoder),
        }
    }

    /// In the same order as [`CvaeModel::networks`].
    pub fn parts(&self) -> [&Gradients; 4] {
        [&self.encoder, &self.mean_head, &self.logvar_head, &self.decoder]
    }

    fn is_finite(&self) -> bool {
        self.parts().iter().all(|g| g.is_finite())
    }
}

/// Batch objective with its components.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub gradients: CvaeGradients,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvaeModel {
    encoder: Mlp,
    mean_head: Mlp,
    logvar_head: Mlp,
    decoder: Mlp,
    stats: NormalizationStats,
}

pub const NETWORK_NAMES: [&str; 4] = ["encoder", "mean_head", "logvar_head", "decoder"];

impl CvaeModel {
    /// Glorot-initialized model.
    pub fn new<R: Rng + ?Sized>(stats: NormalizationStats, rng: &mut R) -> Result<Self, CvaeError> {
        let relu2 = [Activation::Relu, Activation::Relu];
        let encoder = Mlp::glorot(
            &[CONDITION_DIM + MIX_DIM, ENCODER_HIDDEN[0], ENCODER_HIDDEN[1]],
            &relu2,
            rng,
        )?;
        let mean_head = Mlp::glorot(&[ENCODER_HIDDEN[1], LATENT_DIM], &[Activation::Identity], rng)?;
        let logvar_head = Mlp::glorot(&[ENCODER_HIDDEN[1], LATENT_DIM], &[Activation::Identity], rng)?;
        let decoder = Mlp::glorot(
            &[CONDITION_DIM + LATENT_DIM, DECODER_HIDDEN[0], DECODER_HIDDEN[1], MIX_DIM],
            &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
            rng,
        )?;
        Ok(Self { encoder, mean_head, logvar_head, decoder, stats })
    }

    /// Reassembles a model from stored networks, checking the architecture.
    pub fn from_model_file(mut file: ModelFile, stats: NormalizationStats) -> Result<Self, CvaeError> {
        let model = Self {
            encoder: file.take("encoder")?,
            mean_head: file.take("mean_head")?,
            logvar_head: file.take("logvar_head")?,
            decoder: file.take("decoder")?,
            stats,
        };
        model.check_architecture()?;
        Ok(model)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut file = ModelFile::default();
        for (name, net) in NETWORK_NAMES.iter().zip(self.networks()) {
            file.push(*name, net.clone());
        }
        file
    }

    fn check_architecture(&self) -> Result<(), CvaeError> {
        let widths = |m: &Mlp| -> Vec<(usize, usize, Activation)> {
            m.layers().iter().map(|l| (l.inputs(), l.outputs(), l.activation())).collect()
        };
        use Activation::*;
        let expected = [
            vec![(17, 25, Relu), (25, 20, Relu)],
            vec![(20, 2, Identity)],
            vec![(20, 2, Identity)],
            vec![(12, 20, Relu), (20, 25, Relu), (25, 7, Sigmoid)],
        ];
        for ((net, want), name) in self.networks().iter().zip(expected).zip(NETWORK_NAMES) {
            if widths(net) != want {
                return Err(CvaeError::Nn(NnError::Shape(format!("{name} architecture mismatch"))));
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn networks(&self) -> [&Mlp; 4] {
        [&self.encoder, &self.mean_head, &self.logvar_head, &self.decoder]
    }

    pub fn networks_mut(&mut self) -> [&mut Mlp; 4] {
        [&mut self.encoder, &mut self.mean_head, &mut self.logvar_head, &mut self.decoder]
    }

    pub fn num_params(&self) -> usize {
        self.networks().iter().map(|n| n.num_params()).sum()
    }

    /// Posterior mean and log-variance of `z` for a scaled `(x, y)` pair.
    pub fn encode(&self, x: &[f64], y: &[f64]) -> Result<([f64; 2], [f64; 2]), CvaeError> {
        check_len(x, CONDITION_DIM)?;
        check_len(y, MIX_DIM)?;
        let input: Vec<f64> = x.iter().chain(y).copied().collect();
        let h = self.encoder.predict(&input)?;
        let mean = self.mean_head.predict(&h)?;
        let logvar = self.logvar_head.predict(&h)?;
        Ok(([mean[0], mean[1]], [logvar[0], logvar[1]]))
    }

    /// Decoder output in `(0, 1)^7`.
    pub fn decode(&self, x: &[f64], z: &LatentCode) -> Result<[f64; MIX_DIM], CvaeError> {
        check_len(x, CONDITION_DIM)?;
        let input: Vec<f64> = x.iter().chain(&z.0).copied().collect();
        let out = self.decoder.predict(&input)?;
        Ok(out.try_into().expect("decoder emits seven values"))
    }

    /// Decodes and maps back to kg/m³ with the training stats.
    pub fn generate(&self, condition: &ConditioningVector, z: &LatentCode) -> Result<MixComposition, CvaeError> {
        let scaled = self.decode(&condition.to_input(), z)?;
        Ok(self.stats.denormalize_mix(&scaled)?)
    }

    /// Batch objective and gradients with caller-supplied noise (one pair per row).
    pub fn elbo_loss(&self, batch: &[TrainingExample], noise: &[[f64; 2]], kl_weight: f64) -> Result<BatchLoss, CvaeError> {
        if batch.is_empty() || noise.len() != batch.len() {
            return Err(CvaeError::Nn(NnError::Dimension { expected: batch.len(), found: noise.len() }));
        }
        let b = batch.len() as f64;
        let mut grads = CvaeGradients::zeros_like(self);
        let (mut recon_sum, mut kl_sum) = (0.0, 0.0);

        for (ex, eps) in batch.iter().zip(noise) {
            let enc_in: Vec<f64> = ex.x.iter().chain(&ex.y).copied().collect();
            let (h, enc_cache) = self.encoder.forward(&enc_in)?;
            let (mean, mean_cache) = self.mean_head.forward(&h)?;
            let (logvar, logvar_cache) = self.logvar_head.forward(&h)?;
            let mean = [mean[0], mean[1]];
            let logvar = [logvar[0], logvar[1]];
            let z = reparameterize(&mean, &logvar, eps);

            let dec_in: Vec<f64> = ex.x.iter().chain(&z.0).copied().collect();
            let (y_hat, dec_cache) = self.decoder.forward(&dec_in)?;
            let (recon, mut d_y) = mse(&y_hat, &ex.y)?;
            let kl = kl_divergence(&mean, &logvar);
            recon_sum += recon;
            kl_sum += kl;

            d_y.iter_mut().for_each(|g| *g /= b);
            let d_dec_in = self.decoder.backward_accumulate(&dec_cache, &d_y, &mut grads.decoder)?;

            let mut d_mean = [0.0; 2];
            let mut d_logvar = [0.0; 2];
            for j in 0..LATENT_DIM {
                let dz = d_dec_in[CONDITION_DIM + j];
                let sigma = (0.5 * logvar[j]).exp();
                d_mean[j] = dz + kl_weight * mean[j] / b;
                d_logvar[j] = dz * eps[j] * 0.5 * sigma + kl_weight * 0.5 * (logvar[j].exp() - 1.0) / b;
            }
            let mut d_h = self.mean_head.backward_accumulate(&mean_cache, &d_mean, &mut grads.mean_head)?;
            let d_h2 = self.logvar_head.backward_accumulate(&logvar_cache, &d_logvar, &mut grads.logvar_head)?;
            d_h.iter_mut().zip(d_h2).for_each(|(a, b)| *a += b);
            self.encoder.backward_accumulate(&enc_cache, &d_h, &mut grads.encoder)?;
        }
        let reconstruction = recon_sum / b;
        let kl = kl_sum / b;
        Ok(BatchLoss { loss: reconstruction + kl_weight * kl, reconstruction, kl, gradients: grads })
    }

    /// Objective only, for finite-difference checks.
    pub fn elbo_value(&self, batch: &[TrainingExample], noise: &[[f64; 2]], kl_weight: f64) -> Result<f64, CvaeError> {
        let b = batch.len() as f64;
        let mut total = 0.0;
        for (ex, eps) in batch.iter().zip(noise) {
            let (mean, logvar) = self.encode(&ex.x, &ex.y)?;
            let z = reparameterize(&mean, &logvar, eps);
            let y_hat = self.decode(&ex.x, &z)?;
            total += mse(&y_hat, &ex.y)?.0 + kl_weight * kl_divergence(&mean, &logvar);
        }
        Ok(total / b)
    }

    /// Reconstructs `y` through the posterior mean (no sampling).
    pub fn reconstruct(&self, example: &TrainingExample) -> Result<[f64; MIX_DIM], CvaeError> {
        let (mean, _) = self.encode(&example.x, &example.y)?;
        self.decode(&example.x, &LatentCode(mean))
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<(), CvaeError> {
    if v.len() != expected {
        return Err(CvaeError::Nn(NnError::Dimension { expected, found: v.len() }));
    }
    Ok(())
}

/// Trains a fresh model on scaled examples. Shuffling, initialization and
/// noise each draw from their own stream derived from `config.seed`.
pub fn train(
    examples: &[TrainingExample],
    stats: NormalizationStats,
    config: &TrainConfig,
) -> Result<(CvaeModel, Vec<EpochLoss>), CvaeError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(CvaeError::EmptyDataset);
    }
    let mut init_rng = rng::stream(config.seed, "cvae/init");
    let mut shuffle_rng = rng::stream(config.seed, "cvae/shuffle");
    let mut noise_rng = rng::stream(config.seed, "cvae/noise");

    let mut model = CvaeModel::new(stats, &mut init_rng)?;
    let adam = AdamConfig { lr: config.learning_rate, ..AdamConfig::default() };
    let mut states: Vec<AdamState> = model.networks().iter().map(|n| AdamState::new(n, adam)).collect();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch_rows = Vec::with_capacity(config.batch_size);
    let mut noise = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut recon_sum, mut kl_sum) = (0.0, 0.0, 0.0);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_rows.clear();
            batch_rows.extend(chunk.iter().map(|&i| examples[i]));
            noise.clear();
            noise.extend(chunk.iter().map(|_| [noise_rng.sample(StandardNormal), noise_rng.sample(StandardNormal)]));

            let diverged = || CvaeError::Diverged { epoch, batch: batch_idx, history: history.clone() };
            let out = match model.elbo_loss(&batch_rows, &noise, config.kl_weight) {
                Ok(out) => out,
                Err(CvaeError::Nn(NnError::NonFinite(_))) => return Err(diverged()),
                Err(e) => return Err(e),
            };
            if !out.loss.is_finite() || !out.gradients.is_finite() {
                return Err(diverged());
            }
            let n = chunk.len() as f64;
            loss_sum += out.loss * n;
            recon_sum += out.reconstruction * n;
            kl_sum += out.kl * n;
            for ((net, grads), state) in model.networks_mut().into_iter().zip(out.gradients.parts()).zip(&mut states) {
                adam_step(net, grads, state)?;
            }
        }
        let n = examples.len() as f64;
        history.push(EpochLoss { epoch, loss: loss_sum / n, reconstruction: recon_sum / n, kl: kl_sum / n });
    }
    Ok((model, history))
}

/// Closed interval in scaled units; `lo == hi` pins the value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitInterval {
    pub lo: f64,
    pub hi: f64,
}

impl UnitInterval {
    pub const FULL: UnitInterval = UnitInterval { lo: 0.0, hi: 1.0 };

    pub fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn validate(&self, name: &'static str) -> Result<(), CvaeError> {
        for value in [self.lo, self.hi] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CvaeError::Condition { name, value });
            }
        }
        if self.lo > self.hi {
            return Err(CvaeError::Config(format!("{name} interval has lo > hi")));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lo + u * (self.hi - self.lo)
    }
}

/// How conditioning values are drawn for batch generation. Each continuous
/// dimension is uniform on its interval (the default is `U[0, 1]`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub strength: UnitInterval,
    pub gwp: UnitInterval,
    pub ap: UnitInterval,
    pub cbw: UnitInterval,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self { strength: UnitInterval::FULL, gwp: UnitInterval::FULL, ap: UnitInterval::FULL, cbw: UnitInterval::FULL }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<(), CvaeError> {
        self.strength.validate("strength")?;
        self.gwp.validate("gwp")?;
        self.ap.validate("ap")?;
        self.cbw.validate("cbw")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub mix: MixComposition,
    pub condition: ConditioningVector,
    pub z: LatentCode,
}

/// Draws `count` samples for one age group. Work is split into fixed-size
/// chunks, each with its own counter-indexed random stream, so the output
/// depends only on the seed.
pub fn batch_generate(
    model: &CvaeModel,
    count: usize,
    age_group: AgeGroup,
    sampler: &SamplerSpec,
    seed: u64,
) -> Result<Vec<GeneratedSample>, CvaeError> {
    sampler.validate()?;
    let label = format!("generate/{}", age_group.label());
    let chunks: Vec<(usize, usize)> = (0..count)
        .step_by(GENERATION_CHUNK)
        .map(|start| (start, (start + GENERATION_CHUNK).min(count)))
        .collect();
    let parts: Vec<Vec<GeneratedSample>> = chunks
        .par_iter()
        .enumerate()
        .map(|(chunk_idx, &(start, end))| {
            let mut r = rng::substream(seed, &label, chunk_idx as u64);
            (start..end)
                .map(|_| {
                    let condition = ConditioningVector {
                        strength: sampler.strength.sample(&mut r),
                        gwp: sampler.gwp.sample(&mut r),
                        ap: sampler.ap.sample(&mut r),
                        cbw: sampler.cbw.sample(&mut r),
                        age_group,
                    };
                    let z = LatentCode([r.sample(StandardNormal), r.sample(StandardNormal)]);
                    let mix = model.generate(&condition, &z)?;
                    Ok(GeneratedSample { mix, condition, z })
                })
                .collect::<Result<Vec<_>, CvaeError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}
