//! Minimal dense neural-network stack.
//!
//! Supports exactly what the audit needs: dense (leaky-)ReLU layers, a
//! temperature-scaled softmax head, cross-entropy with label smoothing,
//! manual backprop, Adam/SGD, and a deterministic training loop. Everything
//! is `f64` and single-threaded; a fixed `(config, seed, data)` triple fully
//! determines the trained parameters.

mod persist;
mod train;

pub use persist::{load_network, read_network, save_network, write_network};
pub(crate) use train::backprop_from_output_delta;
pub use train::{
    accuracy, backward, cross_entropy_loss, optimizer_step, train, EpochStats, Gradients,
    LayerGradients, OptimizerSpec, OptimizerState, TrainConfig,
};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied inside every `ln` of a predicted score.
pub const LOG_FLOOR: f64 = 1e-12;

/// Conventional slope when a config asks for leaky ReLU without one.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Element-wise activation used on every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub fn leaky_default() -> Self {
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Activation::LeakyRelu { slope } = self {
            if !(*slope > 0.0 && *slope < 1.0) {
                return Err(Error::Config(format!(
                    "leaky_relu slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    /// Derivative with the z = 0 tie assigned to the negative branch.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    *slope
                }
            }
        }
    }
}

/// Architecture of a dense classifier.
///
/// `num_classes >= 2` and a non-empty `hidden_dims` are required wherever a
/// network is trained as a softmax classifier (see
/// [`NetworkConfig::validate_classifier`]). The looser [`NetworkConfig::validate`]
/// admits the single-output inference model used by the top-3 attack and
/// bare linear layers used in tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden_dims entries must be positive".into()));
        }
        self.activation.validate()
    }

    /// Extra constraints for target/shadow classifiers.
    pub fn validate_classifier(&self) -> Result<()> {
        self.validate()?;
        if self.num_classes < 2 {
            return Err(Error::Config(
                "classifier networks need num_classes >= 2".into(),
            ));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::Config(
                "target/shadow networks need at least one hidden layer".into(),
            ));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for each layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.num_classes));
        dims
    }
}

/// One dense layer; weights are `[out x in]`, bias is `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// A dense feed-forward network. Hidden layers use `config.activation`;
/// the final layer is affine (logits).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
}

/// Cached per-layer inputs and pre-activations from one forward pass.
pub(crate) struct ForwardTrace {
    /// `inputs[l]` is the input matrix fed to layer `l` (so `inputs[0]` is the batch).
    pub inputs: Vec<Array2<f64>>,
    /// `pre_activations[l]` is `inputs[l] * W_l^T + b_l`; the last entry holds the logits.
    pub pre_activations: Vec<Array2<f64>>,
}

impl Network {
    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.num_classes
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Logits for a batch (rows are samples).
    pub fn forward_logits(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        let mut trace = self.forward_trace(batch)?;
        Ok(trace
            .pre_activations
            .pop()
            .expect("network has at least one layer"))
    }

    pub(crate) fn forward_trace(&self, batch: &Array2<f64>) -> Result<ForwardTrace> {
        if batch.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: batch.ncols(),
            });
        }
        let num_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(num_layers);
        let mut pre_activations = Vec::with_capacity(num_layers);
        let mut current = batch.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = current.dot(&layer.weights.t()) + &layer.bias;
            inputs.push(current);
            current = if idx + 1 < num_layers {
                z.mapv(|v| self.config.activation.apply(v))
            } else {
                z.clone()
            };
            pre_activations.push(z);
        }
        Ok(ForwardTrace {
            inputs,
            pre_activations,
        })
    }

    /// Activation pattern at `x`: derivative of each hidden unit's activation,
    /// layer by layer. Two inputs share an affine region iff patterns match.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| Error::InvalidValue(e.to_string()))?;
        let trace = self.forward_trace(&batch)?;
        Ok(trace.pre_activations[..self.layers.len() - 1]
            .iter()
            .map(|z| {
                z.row(0)
                    .iter()
                    .map(|&v| self.config.activation.derivative(v))
                    .collect()
            })
            .collect())
    }

    /// The affine map `(A, c)` of the region containing `x`, built from the
    /// activation pattern at `x`: `f(y) = A y + c` throughout that region.
    pub fn local_affine_map(&self, x: &[f64]) -> Result<(Array2<f64>, Array1<f64>)> {
        let pattern = self.activation_pattern(x)?;
        let mut a: Array2<f64> = self.layers[0].weights.clone();
        let mut c: Array1<f64> = self.layers[0].bias.clone();
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            let mask = Array1::from(pattern[l - 1].clone());
            // apply the region's fixed activation slopes, then the next layer
            let a_masked = &a * &mask.view().insert_axis(ndarray::Axis(1));
            let c_masked = &c * &mask;
            a = layer.weights.dot(&a_masked);
            c = layer.weights.dot(&c_masked) + &layer.bias;
        }
        Ok((a, c))
    }
}

/// He-style init: weights uniform in `[-sqrt(2/fan_in), sqrt(2/fan_in))`,
/// biases zero. Deterministic in `(config, seed)`; weights are drawn layer
/// by layer in row-major order.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let layers = config
        .layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let bound = (2.0 / fan_in as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(Network {
        config: config.clone(),
        layers,
    })
}

/// Softmax temperature; `t = 1` reproduces the plain softmax and larger
/// values flatten the scores toward uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemperatureConfig {
    pub t: f64,
}

impl TemperatureConfig {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "temperature must be positive and finite, got {t}"
            )));
        }
        Ok(TemperatureConfig { t })
    }

    pub fn none() -> Self {
        TemperatureConfig { t: 1.0 }
    }
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        TemperatureConfig::none()
    }
}

/// A probability vector over classes: entries in `[0, 1]`, summing to 1
/// within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidValue("score vector is empty".into()));
        }
        let mut sum = 0.0;
        for &s in &scores {
            if !(0.0..=1.0).contains(&s) || !s.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "score {s} outside [0, 1]"
                )));
            }
            sum += s;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidValue(format!(
                "scores sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(ScoreVector(scores))
    }

    /// Trusted constructor for vectors produced by [`softmax`].
    pub(crate) fn from_softmax(scores: Vec<f64>) -> Self {
        ScoreVector(scores)
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn max_score(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// First index of the maximum value.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Temperature-scaled softmax with max-subtraction for stability.
///
/// Invariant under adding a constant to all logits; approaches the uniform
/// vector as `t` grows.
pub fn softmax(logits: &[f64], temp: TemperatureConfig) -> ScoreVector {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exps: Vec<f64> = logits.iter().map(|&z| ((z - m) / temp.t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    for e in &mut exps {
        *e /= sum;
    }
    ScoreVector::from_softmax(exps)
}

/// Row-wise temperature-scaled softmax.
pub(crate) fn softmax_rows(logits: &Array2<f64>, t: f64) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = ((*v - m) / t).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Prediction scores for a feature batch, one [`ScoreVector`] per row.
pub fn predict_scores(
    net: &Network,
    features: &Array2<f64>,
    temp: TemperatureConfig,
) -> Result<Vec<ScoreVector>> {
    let logits = net.forward_logits(features)?;
    let scores = softmax_rows(&logits, temp.t);
    Ok(scores
        .rows()
        .into_iter()
        .map(|r| ScoreVector::from_softmax(r.to_vec()))
        .collect())
}
