//! Mini-batch Adam training on mean-squared reconstruction error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use super::{Activation, FeatureVector, MlpModel};
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
    /// Fraction of the dataset used for training; the rest is the test set.
    pub split_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            rng_seed: 0,
            split_ratio: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be > 0"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::config("train.split_ratio must be in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_test_loss: f64,
    pub history: Vec<EpochLoss>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Gradients {
            weights: m.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: m.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Row-major batch activations for every layer boundary.
struct Activations {
    batch: usize,
    layers: Vec<Vec<f64>>,
}

fn layer_forward(m: &MlpModel, l: usize, x: &[f64], batch: usize) -> Vec<f64> {
    let (n_in, n_out) = (m.layer_dims[l], m.layer_dims[l + 1]);
    let mut y = Vec::with_capacity(batch * n_out);
    for _ in 0..batch {
        y.extend_from_slice(&m.biases[l]);
    }
    gemm(batch, n_in, n_out, x, false, &m.weights[l], true, 1.0, &mut y);
    if m.activation(l) == Activation::Relu {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    y
}

fn forward_batch(m: &MlpModel, x: &[f64], batch: usize) -> Activations {
    let mut layers = Vec::with_capacity(m.depth() + 1);
    layers.push(x.to_vec());
    for l in 0..m.depth() {
        let y = layer_forward(m, l, &layers[l], batch);
        layers.push(y);
    }
    Activations { batch, layers }
}

fn batch_loss(out: &[f64], target: &[f64], batch: usize) -> f64 {
    let sq: f64 = out.iter().zip(target).map(|(y, x)| (y - x) * (y - x)).sum();
    sq / (batch * (out.len() / batch.max(1))) as f64
}

fn backward(m: &MlpModel, acts: &Activations, target: &[f64], grads: &mut Gradients) {
    let batch = acts.batch;
    let out = &acts.layers[m.depth()];
    let scale = 2.0 / out.len() as f64;
    let mut delta: Vec<f64> = out.iter().zip(target).map(|(y, x)| scale * (y - x)).collect();
    for l in (0..m.depth()).rev() {
        let (n_in, n_out) = (m.layer_dims[l], m.layer_dims[l + 1]);
        if m.activation(l) == Activation::Relu {
            for (d, &y) in delta.iter_mut().zip(&acts.layers[l + 1]) {
                if y <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        gemm(n_out, batch, n_in, &delta, true, &acts.layers[l], false, 0.0, &mut grads.weights[l]);
        let gb = &mut grads.biases[l];
        gb.iter_mut().for_each(|v| *v = 0.0);
        for row in delta.chunks_exact(n_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if l > 0 {
            let mut prev = vec![0.0; batch * n_in];
            gemm(batch, n_out, n_in, &delta, false, &m.weights[l], false, 0.0, &mut prev);
            delta = prev;
        }
    }
}

/// Mean-squared reconstruction loss of a batch and its exact gradient.
///
/// `batch` holds samples back to back; the loss is the mean over samples and
/// output dimensions.
pub fn loss_and_gradient(m: &MlpModel, batch: &[f64]) -> Result<(f64, Gradients)> {
    let dim = m.input_dim();
    if batch.is_empty() || !batch.len().is_multiple_of(dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: batch.len(),
        });
    }
    let n = batch.len() / dim;
    let acts = forward_batch(m, batch, n);
    let loss = batch_loss(&acts.layers[m.depth()], batch, n);
    let mut g = Gradients::zeros_like(m);
    backward(m, &acts, batch, &mut g);
    Ok((loss, g))
}

/// Encoder pass over many samples, batched through GEMM.
pub fn encode_batch(m: &MlpModel, samples: &[Vec<f64>]) -> Result<Vec<FeatureVector>> {
    let dim = m.input_dim();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let latent = m.latent_dim();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let mut cur: Vec<f64> = chunk.iter().flat_map(|s| s.iter().copied()).collect();
        for l in 0..m.latent_layer_index {
            cur = layer_forward(m, l, &cur, chunk.len());
        }
        out.extend(cur.chunks_exact(latent).map(|v| FeatureVector { values: v.to_vec() }));
    }
    Ok(out)
}

/// Mean reconstruction MSE over a set of samples.
pub fn mse(m: &MlpModel, samples: &[Vec<f64>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let flat: Vec<f64> = chunk.iter().flat_map(|s| s.iter().copied()).collect();
        let acts = forward_batch(m, &flat, chunk.len());
        total += batch_loss(&acts.layers[m.depth()], &flat, chunk.len()) * chunk.len() as f64;
    }
    total / samples.len() as f64
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        Adam {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, g: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let params = model.weights.iter_mut().chain(model.biases.iter_mut());
        let grads = g.weights.iter().chain(&g.biases);
        let ms = self.m.weights.iter_mut().chain(self.m.biases.iter_mut());
        let vs = self.v.weights.iter_mut().chain(self.v.biases.iter_mut());
        for (((p, g), m), v) in params.zip(grads).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Train a copy of `model` on `data`.
///
/// The first `floor(split_ratio * n)` samples form the training set and the
/// rest the test set. Batch order is driven by `rng_seed` only, so a fixed
/// seed reproduces the loss history exactly.
pub fn train(model: &MlpModel, data: &[Vec<f64>], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    model.validate()?;
    let dim = model.input_dim();
    if let Some(bad) = data.iter().find(|s| s.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let n_train = ((data.len() as f64) * cfg.split_ratio).floor() as usize;
    let (train_set, test_set) = data.split_at(n_train);
    if train_set.len() < cfg.batch_size {
        return Err(Error::config(format!(
            "training set of {} samples is smaller than batch size {}",
            train_set.len(),
            cfg.batch_size
        )));
    }
    let eval_set = if test_set.is_empty() { train_set } else { test_set };

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let initial_test_loss = mse(&model, eval_set);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut flat = Vec::with_capacity(cfg.batch_size * dim);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            flat.clear();
            for &i in idx {
                flat.extend_from_slice(&train_set[i]);
            }
            let acts = forward_batch(&model, &flat, idx.len());
            let loss = batch_loss(&acts.layers[model.depth()], &flat, idx.len());
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    detail: format!("non-finite batch loss {loss}"),
                });
            }
            sum += loss * idx.len() as f64;
            backward(&model, &acts, &flat, &mut grads);
            adam.step(&mut model, &grads, cfg.learning_rate);
        }
        let train_loss = sum / train_set.len() as f64;
        let test_loss = mse(&model, eval_set);
        if !test_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                detail: format!("non-finite test loss {test_loss}"),
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6e} test {test_loss:.6e}");
        history.push(EpochLoss {
            epoch,
            train_loss,
            test_loss,
        });
    }
    Ok((
        model,
        TrainReport {
            initial_test_loss,
            history,
            n_train: train_set.len(),
            n_test: test_set.len(),
        },
    ))
}
