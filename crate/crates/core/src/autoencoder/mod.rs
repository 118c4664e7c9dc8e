//! Fully connected autoencoder used as the CIR feature extractor.
//!
//! Only the encoder half is used at run time; the decoder exists so the
//! network can be trained to reproduce unattacked CIRs.

mod complexity;
mod gemm;
mod gradcheck;
mod train;

pub use complexity::{complexity_of_dims, Complexity};
pub use gradcheck::{gradient_check, GRADCHECK_STEP};
pub use train::{encode_batch, loss_and_gradient, mse, train, EpochLoss, Gradients, TrainConfig, TrainReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default layer widths, input through latent to output.
pub const DEFAULT_DIMS: [usize; 7] = [700, 512, 128, 32, 128, 512, 700];

/// Default latent (feature) dimension.
pub const DEFAULT_LATENT_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Linear,
}

/// Latent activations of one CIR.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dense autoencoder. `weights[d]` is `dims[d + 1] x dims[d]`, row-major.
///
/// Hidden layers use `hidden_activation`; the latent layer and the output
/// layer are always linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub hidden_activation: Activation,
    /// Index into `layer_dims` of the latent layer.
    pub latent_layer_index: usize,
}

fn latent_index(dims: &[usize], latent_dim: usize) -> Result<usize> {
    if dims.len() < 3 {
        return Err(Error::config("autoencoder needs at least input, latent and output dims"));
    }
    if dims.contains(&0) {
        return Err(Error::config("layer dims must be positive"));
    }
    if dims[0] != dims[dims.len() - 1] {
        return Err(Error::config(format!(
            "input dim {} must equal output dim {}",
            dims[0],
            dims[dims.len() - 1]
        )));
    }
    dims[1..dims.len() - 1]
        .iter()
        .position(|&d| d == latent_dim)
        .map(|p| p + 1)
        .ok_or_else(|| Error::config(format!("dims {dims:?} have no latent layer of width {latent_dim}")))
}

/// Build a model with scaled-uniform weights and zero biases.
pub fn init_model<R: Rng + ?Sized>(dims: &[usize], latent_dim: usize, rng: &mut R) -> Result<MlpModel> {
    let latent = latent_index(dims, latent_dim)?;
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect());
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpModel {
        layer_dims: dims.to_vec(),
        weights,
        biases,
        hidden_activation: Activation::Relu,
        latent_layer_index: latent,
    })
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(dims: &[usize], latent_dim: usize) -> Result<Self> {
        let latent = latent_index(dims, latent_dim)?;
        Ok(MlpModel {
            layer_dims: dims.to_vec(),
            weights: dims.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: dims.windows(2).map(|p| vec![0.0; p[1]]).collect(),
            hidden_activation: Activation::Relu,
            latent_layer_index: latent,
        })
    }

    /// Check shapes and finiteness.
    pub fn validate(&self) -> Result<()> {
        let dims = &self.layer_dims;
        let latent = self.latent_layer_index;
        if dims.len() < 3 || latent == 0 || latent >= dims.len() - 1 {
            return Err(Error::config("malformed layer dims or latent index"));
        }
        if dims[0] != dims[dims.len() - 1] {
            return Err(Error::config("input dim must equal output dim"));
        }
        if self.weights.len() != dims.len() - 1 || self.biases.len() != dims.len() - 1 {
            return Err(Error::config("layer count does not match dims"));
        }
        for (d, pair) in dims.windows(2).enumerate() {
            if self.weights[d].len() != pair[0] * pair[1] || self.biases[d].len() != pair[1] {
                return Err(Error::config(format!("layer {d} has inconsistent shape")));
            }
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::config("model has non-finite parameters"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_dims[self.latent_layer_index]
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.latent_layer_index || layer + 1 == self.depth() {
            Activation::Linear
        } else {
            self.hidden_activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn complexity(&self) -> Complexity {
        complexity_of_dims(&self.layer_dims)
    }

    fn run_layers(&self, x: &[f64], layers: std::ops::Range<usize>) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in layers {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let relu = self.activation(l) == Activation::Relu;
            cur = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = self.biases[l][o] + row.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                    if relu {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
        }
        cur
    }

    /// Encoder forward pass up to the latent layer.
    pub fn encode(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(FeatureVector {
            values: self.run_layers(x, 0..self.latent_layer_index),
        })
    }

    /// Decoder forward pass from the latent layer to the output.
    pub fn decode(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        if f.len() != self.latent_dim() {
            return Err(Error::LengthMismatch {
                expected: self.latent_dim(),
                actual: f.len(),
            });
        }
        Ok(self.run_layers(&f.values, self.latent_layer_index..self.depth()))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }
}
