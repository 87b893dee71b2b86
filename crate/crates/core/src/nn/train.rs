//! Loss, manual backprop, optimizers, and the training loop.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax_rows, ForwardTrace, Network, ScoreVector, LOG_FLOOR};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Optimizer selection with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        OptimizerSpec::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            OptimizerSpec::Adam { lr, .. } | OptimizerSpec::Sgd { lr } => *lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if let OptimizerSpec::Adam {
            beta1, beta2, eps, ..
        } = self
        {
            if !(0.0..1.0).contains(beta1) || !(0.0..1.0).contains(beta2) || *eps <= 0.0 {
                return Err(Error::Config("invalid adam hyperparameters".into()));
            }
        }
        Ok(())
    }
}

/// Training hyperparameters for a classifier.
///
/// `seed` drives the per-epoch shuffle; with a fixed `(config, seed, data)`
/// triple the resulting parameters are bit-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    /// Label-smoothing factor alpha in [0, 1).
    #[serde(default)]
    pub label_smoothing: f64,
    /// Loss-coupled L2 penalty `lambda * sum ||W||^2` on weights (not biases).
    #[serde(default)]
    pub l2_lambda: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing must lie in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if !self.l2_lambda.is_finite() || self.l2_lambda < 0.0 {
            return Err(Error::Config("l2_lambda must be nonnegative".into()));
        }
        self.optimizer.validate()
    }
}

/// Gradient (or moment) storage shaped like one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients for every layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

/// Adam moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: u64,
    first_moment: Vec<LayerGradients>,
    second_moment: Vec<LayerGradients>,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        OptimizerState {
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }
}

/// Mean cross-entropy over a batch of score vectors, with smoothed targets
/// `(1 - alpha) * onehot + alpha / d` and scores floored at [`LOG_FLOOR`]
/// inside the log.
pub fn cross_entropy_loss(scores: &[ScoreVector], labels: &[usize], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidValue(format!(
            "smoothing alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let d = scores[0].dim();
    let mut total = 0.0;
    for (sv, &label) in scores.iter().zip(labels) {
        if label >= d {
            return Err(Error::InvalidValue(format!(
                "label {label} out of range for {d} classes"
            )));
        }
        let uniform = alpha / d as f64;
        for (j, &s) in sv.scores().iter().enumerate() {
            let target = if j == label {
                1.0 - alpha + uniform
            } else {
                uniform
            };
            if target > 0.0 {
                total -= target * s.max(LOG_FLOOR).ln();
            }
        }
    }
    Ok(total / scores.len() as f64)
}

fn smoothed_targets(labels: &[usize], num_classes: usize, alpha: f64) -> Array2<f64> {
    let uniform = alpha / num_classes as f64;
    let mut targets = Array2::from_elem((labels.len(), num_classes), uniform);
    for (i, &label) in labels.iter().enumerate() {
        targets[(i, label)] += 1.0 - alpha;
    }
    targets
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidValue(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

/// Gradients of `mean CE(softmax(f(x)), smoothed targets) + lambda * sum ||W||^2`
/// with respect to every parameter.
pub fn backward(
    net: &Network,
    batch: &Array2<f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<Gradients> {
    Ok(loss_and_gradients(net, batch, labels, cfg)?.1)
}

/// Full objective value (cross-entropy plus L2 penalty) and its gradients.
pub(crate) fn loss_and_gradients(
    net: &Network,
    batch: &Array2<f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(f64, Gradients)> {
    if batch.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.nrows(),
            actual: labels.len(),
        });
    }
    let d = net.output_dim();
    check_labels(labels, d)?;

    let trace = net.forward_trace(batch)?;
    let logits = trace.pre_activations.last().expect("nonempty network");
    let scores = softmax_rows(logits, 1.0);
    let targets = smoothed_targets(labels, d, cfg.label_smoothing);

    let n = batch.nrows() as f64;
    let mut loss = 0.0;
    for (s, t) in scores.iter().zip(targets.iter()) {
        if *t > 0.0 {
            loss -= t * s.max(LOG_FLOOR).ln();
        }
    }
    loss /= n;
    if cfg.l2_lambda > 0.0 {
        let penalty: f64 = net
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum();
        loss += cfg.l2_lambda * penalty;
    }

    let delta = (&scores - &targets) / n;
    let grads = backprop_from_output_delta(net, &trace, delta, cfg.l2_lambda);
    Ok((loss, grads))
}

/// Propagate an output-layer delta (dLoss/dLogits) back through the network.
/// `l2_lambda` adds `2 * lambda * W` to each weight gradient.
pub(crate) fn backprop_from_output_delta(
    net: &Network,
    trace: &ForwardTrace,
    mut delta: Array2<f64>,
    l2_lambda: f64,
) -> Gradients {
    let num_layers = net.layers.len();
    let mut layers: Vec<LayerGradients> = Vec::with_capacity(num_layers);
    for l in (0..num_layers).rev() {
        let mut grad_w = delta.t().dot(&trace.inputs[l]);
        if l2_lambda > 0.0 {
            grad_w = grad_w + &net.layers[l].weights * (2.0 * l2_lambda);
        }
        let grad_b = delta.sum_axis(Axis(0));
        if l > 0 {
            let upstream = delta.dot(&net.layers[l].weights);
            let z = &trace.pre_activations[l - 1];
            delta = upstream * z.mapv(|v| net.config.activation.derivative(v));
        }
        layers.push(LayerGradients {
            weights: grad_w,
            bias: grad_b,
        });
    }
    layers.reverse();
    Gradients { layers }
}

/// One optimizer update in place. Adam uses bias-corrected moments; SGD is
/// `p <- p - lr * g`.
pub fn optimizer_step(
    net: &mut Network,
    grads: &Gradients,
    state: &mut OptimizerState,
    spec: &OptimizerSpec,
) -> Result<()> {
    if grads.layers.len() != net.layers.len() {
        return Err(Error::DimensionMismatch {
            expected: net.layers.len(),
            actual: grads.layers.len(),
        });
    }
    match *spec {
        OptimizerSpec::Sgd { lr } => {
            for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
                layer.weights.scaled_add(-lr, &g.weights);
                layer.bias.scaled_add(-lr, &g.bias);
            }
        }
        OptimizerSpec::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            state.step += 1;
            let t = state.step as i32;
            let corr1 = 1.0 - beta1.powi(t);
            let corr2 = 1.0 - beta2.powi(t);
            for (((layer, g), m), v) in net
                .layers
                .iter_mut()
                .zip(&grads.layers)
                .zip(&mut state.first_moment)
                .zip(&mut state.second_moment)
            {
                adam_update(
                    layer.weights.as_slice_mut().expect("contiguous"),
                    g.weights.as_slice().expect("contiguous"),
                    m.weights.as_slice_mut().expect("contiguous"),
                    v.weights.as_slice_mut().expect("contiguous"),
                    lr,
                    beta1,
                    beta2,
                    eps,
                    corr1,
                    corr2,
                );
                adam_update(
                    layer.bias.as_slice_mut().expect("contiguous"),
                    g.bias.as_slice().expect("contiguous"),
                    m.bias.as_slice_mut().expect("contiguous"),
                    v.bias.as_slice_mut().expect("contiguous"),
                    lr,
                    beta1,
                    beta2,
                    eps,
                    corr1,
                    corr2,
                );
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    corr1: f64,
    corr2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Mean objective value (cross-entropy plus L2 penalty) over the epoch.
    pub loss: f64,
    /// Training accuracy measured after the epoch's updates.
    pub accuracy: f64,
}

/// Train a softmax classifier in place with seeded mini-batch shuffling.
/// Returns one [`EpochStats`] per epoch; the last partial batch is kept.
pub fn train(
    net: &mut Network,
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if net.output_dim() < 2 {
        return Err(Error::Config(
            "classifier training needs num_classes >= 2".into(),
        ));
    }
    if dataset.feature_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: dataset.feature_dim(),
        });
    }
    check_labels(&dataset.labels, net.output_dim())?;

    let n = dataset.len();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(net);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.features.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset.labels[i]).collect();
            let (loss, grads) = loss_and_gradients(net, &batch, &labels, cfg)?;
            optimizer_step(net, &grads, &mut state, &cfg.optimizer)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        history.push(EpochStats {
            loss: epoch_loss / n as f64,
            accuracy: accuracy(net, dataset)?,
        });
    }
    Ok(history)
}

/// Fraction of samples whose argmax prediction matches the label; argmax
/// ties go to the lowest class index.
pub fn accuracy(net: &Network, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let logits = net.forward_logits(&dataset.features)?;
    let mut correct = 0usize;
    for (row, &label) in logits.rows().into_iter().zip(&dataset.labels) {
        if argmax(row.as_slice().expect("contiguous row")) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
