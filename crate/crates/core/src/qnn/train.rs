use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use super::{
    batch_loss, encode_dataset, evaluate_encoded, head_gradient, spsa_gradient, Adam, EncodedSample,
    QnnModel,
};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub spsa_c: f64,
    pub spsa_repeats: usize,
    pub seed: u64,
    pub noise: Option<NoiseModel>,
    /// 0 means exact expectations.
    pub shots: u32,
    /// When false θ stays fixed and only the head learns.
    pub train_quantum: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.01,
            batch_size: 32,
            spsa_c: 0.01,
            spsa_repeats: 1,
            seed: 0,
            noise: None,
            shots: 0,
            train_quantum: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Range(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Range("batch size must be positive".into()));
        }
        if !(self.spsa_c > 0.0) {
            return Err(Error::Range(format!("SPSA c {} must be positive", self.spsa_c)));
        }
        if self.spsa_repeats == 0 {
            return Err(Error::Range("SPSA repeats must be positive".into()));
        }
        Ok(())
    }

    fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref().filter(|m| !m.is_noiseless())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub model: QnnModel,
    pub seed: u64,
    pub wall_clock: Duration,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.test_accuracy.last().copied()
    }

    /// `epoch,train_loss,test_loss,test_accuracy` rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,test_loss,test_accuracy\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.train_loss[e],
                self.test_loss[e],
                self.test_accuracy[e]
            ));
        }
        out
    }
}

const STEP_KEY: u64 = 0x5354_4550;

/// Mini-batch training. Each batch takes one SPSA step on θ and one exact
/// step on the head, both gradients taken at the same parameters.
pub fn train(
    model: &QnnModel,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Shape("training set is empty".into()));
    }
    if test_set.is_empty() {
        return Err(Error::Shape("test set is empty".into()));
    }
    let start = Instant::now();
    let noise = config.noise();
    let train_enc = encode_dataset(model, train_set, noise)?;
    let test_enc = encode_dataset(model, test_set, noise)?;

    let mut model = model.clone();
    let classes = model.n_classes();
    let n_qubits = model.n_qubits();
    let mut theta_opt = Adam::new(model.theta().len(), config.learning_rate);
    let mut head_opt = Adam::new(classes * (n_qubits + 1), config.learning_rate);
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        test_loss: Vec::with_capacity(config.epochs),
        test_accuracy: Vec::with_capacity(config.epochs),
        model: model.clone(),
        seed: config.seed,
        wall_clock: Duration::ZERO,
    };

    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    for epoch in 0..config.epochs {
        let epoch_seed = seed::derive(config.seed, &[epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut seed::derived_rng(epoch_seed, &[seed::label_key("shuffle")]));

        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let step_seed = seed::derive(epoch_seed, &[STEP_KEY, step as u64]);
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &train_enc[i]).collect();
            let theta_grad = if config.train_quantum && !model.theta().is_empty() {
                let mut rng = seed::derived_rng(step_seed, &[seed::label_key("spsa")]);
                Some(spsa_gradient(&model, &batch, config, &mut rng)?)
            } else {
                None
            };
            let head = head_gradient(&model, &batch, noise, config.shots, seed::derive(step_seed, &[1]))?;

            if let Some(g) = theta_grad {
                let mut theta = model.theta().to_vec();
                theta_opt.step(&mut theta, &g);
                model.set_theta(theta)?;
            }
            let mut flat: Vec<f64> = model.head_weights().iter().flatten().copied().collect();
            flat.extend_from_slice(model.head_bias());
            let mut grad: Vec<f64> = head.weights.iter().flatten().copied().collect();
            grad.extend_from_slice(&head.bias);
            head_opt.step(&mut flat, &grad);
            let bias = flat.split_off(classes * n_qubits);
            let weights = flat.chunks(n_qubits).map(<[f64]>::to_vec).collect();
            model.set_head(weights, bias)?;
        }

        let eval_seed = seed::derive(epoch_seed, &[seed::label_key("eval")]);
        let all: Vec<&EncodedSample> = train_enc.iter().collect();
        let train_loss = batch_loss(&model, &all, model.theta(), noise, config.shots, eval_seed)?;
        let (acc, test_loss) = evaluate_encoded(&model, &test_enc, noise, config.shots, seed::derive(eval_seed, &[1]))?;
        report.train_loss.push(train_loss);
        report.test_loss.push(test_loss);
        report.test_accuracy.push(acc);
    }
    report.model = model;
    report.wall_clock = start.elapsed();
    Ok(report)
}
