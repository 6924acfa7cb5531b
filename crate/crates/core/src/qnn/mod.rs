//! Hybrid quantum neural network.
//!
//! encode → PQC → per-qubit ⟨Z⟩ → linear head → softmax. The PQC angles are
//! trained with SPSA gradient estimates; the linear head gets exact
//! softmax/cross-entropy gradients. Both are updated with Adam.

mod adam;
mod checkpoint;
mod spsa;
mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use spsa::spsa_estimate;
pub use train::{train, TrainConfig, TrainReport};

use rand::Rng;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::encode::{encode, EncoderConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::pqc::{apply_pqc_mut, PqcTemplate};
use crate::seed;
use crate::simcore::DensityMatrix;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QnnModel {
    encoder: EncoderConfig,
    template: PqcTemplate,
    theta: Vec<f64>,
    /// `n_classes × n_qubits`
    head_weights: Vec<Vec<f64>>,
    head_bias: Vec<f64>,
    seed: u64,
}

impl QnnModel {
    /// θ drawn uniformly from [−π, π] using `seed`; head starts at zero.
    pub fn new(encoder: EncoderConfig, template: PqcTemplate, n_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = seed::derived_rng(seed, &[seed::label_key("theta-init")]);
        let theta = (0..template.param_count())
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let n = encoder.n_qubits;
        Self::from_parts(encoder, template, theta, vec![vec![0.0; n]; n_classes], vec![0.0; n_classes], seed)
    }

    pub fn from_parts(
        encoder: EncoderConfig,
        template: PqcTemplate,
        theta: Vec<f64>,
        head_weights: Vec<Vec<f64>>,
        head_bias: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if encoder.n_qubits != template.n_qubits() {
            return Err(Error::Shape(format!(
                "encoder uses {} qubits but the template {}",
                encoder.n_qubits,
                template.n_qubits()
            )));
        }
        if theta.len() != template.param_count() {
            return Err(Error::Shape(format!(
                "template needs {} parameters, got {}",
                template.param_count(),
                theta.len()
            )));
        }
        if head_weights.is_empty() || head_weights.len() != head_bias.len() {
            return Err(Error::Shape("head weights and bias disagree on class count".into()));
        }
        if head_weights.iter().any(|row| row.len() != encoder.n_qubits) {
            return Err(Error::Shape("head weight rows must have one entry per qubit".into()));
        }
        Ok(Self {
            encoder,
            template,
            theta,
            head_weights,
            head_bias,
            seed,
        })
    }

    pub fn encoder(&self) -> &EncoderConfig {
        &self.encoder
    }

    pub fn template(&self) -> &PqcTemplate {
        &self.template
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn head_weights(&self) -> &[Vec<f64>] {
        &self.head_weights
    }

    pub fn head_bias(&self) -> &[f64] {
        &self.head_bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_classes(&self) -> usize {
        self.head_bias.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.encoder.n_qubits
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::Shape("theta length changed".into()));
        }
        self.theta = theta;
        Ok(())
    }

    pub fn set_head(&mut self, weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<()> {
        let shape_ok = weights.len() == self.n_classes()
            && bias.len() == self.n_classes()
            && weights.iter().all(|r| r.len() == self.n_qubits());
        if !shape_ok {
            return Err(Error::Shape("head shape changed".into()));
        }
        self.head_weights = weights;
        self.head_bias = bias;
        Ok(())
    }

    /// Encodes `x` (under `noise` when given).
    pub fn encode(&self, x: &[f64], noise: Option<&NoiseModel>) -> Result<DensityMatrix> {
        encode(x, &self.encoder, noise)
    }

    /// ⟨Z⟩ per qubit after running the PQC with `theta` on an encoded state.
    /// `shots == 0` gives exact expectations.
    pub fn measure(
        &self,
        encoded: &DensityMatrix,
        theta: &[f64],
        noise: Option<&NoiseModel>,
        shots: u32,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let mut rho = encoded.clone();
        apply_pqc_mut(&mut rho, &self.template, theta, noise)?;
        if shots == 0 {
            Ok(rho.expect_z_all())
        } else {
            (0..rho.n_qubits())
                .map(|q| rho.sample_expect_z(q, shots, seed::derive(seed, &[q as u64])))
                .collect()
        }
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.head_weights
            .iter()
            .zip(&self.head_bias)
            .map(|(w, b)| w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + b)
            .collect()
    }

    pub fn probabilities(&self, z: &[f64]) -> Vec<f64> {
        softmax(&self.logits(z))
    }

    /// Class probabilities for a raw feature vector.
    pub fn forward(&self, x: &[f64], noise: Option<&NoiseModel>, shots: u32, seed: u64) -> Result<Vec<f64>> {
        let rho = self.encode(x, noise)?;
        let z = self.measure(&rho, &self.theta, noise, shots, seed)?;
        Ok(self.probabilities(&z))
    }

    pub fn predict(&self, x: &[f64], noise: Option<&NoiseModel>, shots: u32, seed: u64) -> Result<usize> {
        Ok(argmax(&self.forward(x, noise, shots, seed)?))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// −ln p[label], with p clamped at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs
        .get(label)
        .ok_or_else(|| Error::Shape(format!("label {label} outside {} classes", probs.len())))?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// First index of the largest entry.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// A training or evaluation sample with its encoding precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSample {
    pub state: DensityMatrix,
    pub label: usize,
}

pub fn encode_dataset(model: &QnnModel, ds: &LabeledDataset, noise: Option<&NoiseModel>) -> Result<Vec<EncodedSample>> {
    if ds.class_count() > model.n_classes() {
        return Err(Error::Shape(format!(
            "dataset has {} classes, model {}",
            ds.class_count(),
            model.n_classes()
        )));
    }
    (0..ds.len())
        .into_par_iter()
        .map(|i| {
            Ok(EncodedSample {
                state: model.encode(ds.feature(i), noise)?,
                label: ds.label(i),
            })
        })
        .collect()
}

/// Mean cross-entropy over `batch` with the PQC angles set to `theta`.
pub fn batch_loss(
    model: &QnnModel,
    batch: &[&EncodedSample],
    theta: &[f64],
    noise: Option<&NoiseModel>,
    shots: u32,
    seed: u64,
) -> Result<f64> {
    let losses: Vec<f64> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let z = model.measure(&s.state, theta, noise, shots, seed::derive(seed, &[i as u64]))?;
            cross_entropy(&model.probabilities(&z), s.label)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// SPSA estimate of ∂L/∂θ for the batch mean loss.
pub fn spsa_gradient<R: Rng>(
    model: &QnnModel,
    batch: &[&EncodedSample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    spsa_estimate(model.theta(), config.spsa_c, config.spsa_repeats, rng, |theta, rng| {
        let shot_seed = rng.random::<u64>();
        batch_loss(model, batch, theta, config.noise.as_ref(), config.shots, shot_seed)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadGradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Batch mean loss at the current parameters.
    pub loss: f64,
}

/// Exact gradient of the mean cross-entropy w.r.t. the head, given measured
/// feature vectors: ∂L/∂logits = probs − onehot.
pub fn head_gradient_from_features(
    weights: &[Vec<f64>],
    bias: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<HeadGradient> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Shape("head gradient needs a non-empty batch".into()));
    }
    let classes = bias.len();
    let n = features.len() as f64;
    let mut gw = vec![vec![0.0; weights[0].len()]; classes];
    let mut gb = vec![0.0; classes];
    let mut loss = 0.0;
    for (z, &label) in features.iter().zip(labels) {
        let logits: Vec<f64> = weights
            .iter()
            .zip(bias)
            .map(|(w, b)| w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + b)
            .collect();
        let probs = softmax(&logits);
        loss += cross_entropy(&probs, label)?;
        for c in 0..classes {
            let d = probs[c] - if c == label { 1.0 } else { 0.0 };
            gb[c] += d / n;
            for (g, zq) in gw[c].iter_mut().zip(z) {
                *g += d * zq / n;
            }
        }
    }
    Ok(HeadGradient {
        weights: gw,
        bias: gb,
        loss: loss / n,
    })
}

/// Head gradient for a batch, measuring each sample at the model's θ.
pub fn head_gradient(
    model: &QnnModel,
    batch: &[&EncodedSample],
    noise: Option<&NoiseModel>,
    shots: u32,
    seed: u64,
) -> Result<HeadGradient> {
    let features: Vec<Vec<f64>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.measure(&s.state, model.theta(), noise, shots, seed::derive(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    head_gradient_from_features(model.head_weights(), model.head_bias(), &features, &labels)
}

/// Accuracy and mean loss over pre-encoded samples.
pub fn evaluate_encoded(
    model: &QnnModel,
    samples: &[EncodedSample],
    noise: Option<&NoiseModel>,
    shots: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Shape("cannot evaluate on an empty dataset".into()));
    }
    let scored: Vec<(bool, f64)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let z = model.measure(&s.state, model.theta(), noise, shots, seed::derive(seed, &[i as u64]))?;
            let probs = model.probabilities(&z);
            Ok((argmax(&probs) == s.label, cross_entropy(&probs, s.label)?))
        })
        .collect::<Result<_>>()?;
    let n = scored.len() as f64;
    let correct = scored.iter().filter(|(ok, _)| *ok).count() as f64;
    let loss = scored.iter().map(|(_, l)| l).sum::<f64>() / n;
    Ok((correct / n, loss))
}

/// Accuracy (argmax, ties to the lowest class) and mean cross-entropy.
pub fn evaluate(
    model: &QnnModel,
    ds: &LabeledDataset,
    noise: Option<&NoiseModel>,
    shots: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::Shape("cannot evaluate on an empty dataset".into()));
    }
    evaluate_encoded(model, &encode_dataset(model, ds, noise)?, noise, shots, seed)
}

/// Argmax predictions for every row of `ds`.
pub fn predict_all(
    model: &QnnModel,
    ds: &LabeledDataset,
    noise: Option<&NoiseModel>,
    shots: u32,
    seed: u64,
) -> Result<Vec<usize>> {
    (0..ds.len())
        .into_par_iter()
        .map(|i| model.predict(ds.feature(i), noise, shots, seed::derive(seed, &[i as u64])))
        .collect()
}
