//! Synthetic dataset generation and the derived non-member constructions.
//!
//! Generators are pure functions of `(spec, seed)`, so parallel callers with
//! explicit seeds stay reproducible. Normalization statistics always come
//! from the training split and are applied unchanged to every derived
//! dataset.

mod csv;

pub use csv::{load_csv, save_csv};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard-deviation floor protecting constant features.
pub const STD_FLOOR: f64 = 1e-8;

/// A feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// `n x m` features, one sample per row.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidValue(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite feature value".into()));
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Seeded subsample of `n` rows without replacement, original order kept.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n > self.len() {
            return Err(Error::InvalidValue(format!(
                "cannot subsample {n} of {} rows",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let mut chosen: Vec<usize> = idx.into_iter().take(n).collect();
        chosen.sort_unstable();
        Ok(self.subset(&chosen))
    }
}

/// Isotropic Gaussian mixture: one `(mean, std)` pair per class, plus class
/// weights (uniform by default via [`MixtureSpec::circle`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(means: Vec<Vec<f64>>, stds: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let spec = MixtureSpec {
            means,
            stds,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Class means evenly spaced on a circle of the given radius in the
    /// first two feature dimensions (zeros elsewhere), equal stds, uniform
    /// weights.
    pub fn circle(num_classes: usize, feature_dim: usize, radius: f64, std: f64) -> Result<Self> {
        if feature_dim < 2 {
            return Err(Error::Config("circle mixture needs feature_dim >= 2".into()));
        }
        let means = (0..num_classes)
            .map(|c| {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / num_classes as f64;
                let mut mean = vec![0.0; feature_dim];
                mean[0] = radius * angle.cos();
                mean[1] = radius * angle.sin();
                mean
            })
            .collect();
        MixtureSpec::new(
            means,
            vec![std; num_classes],
            vec![1.0 / num_classes as f64; num_classes],
        )
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() < 2 {
            return Err(Error::Config("mixture needs at least 2 classes".into()));
        }
        let dim = self.feature_dim();
        if dim == 0 || self.means.iter().any(|m| m.len() != dim) {
            return Err(Error::Config("mixture means must share one dimension".into()));
        }
        if self.stds.len() != self.means.len()
            || self.stds.iter().any(|&s| !s.is_finite() || s <= 0.0)
        {
            return Err(Error::Config("mixture stds must be positive, one per class".into()));
        }
        if self.weights.len() != self.means.len()
            || self.weights.iter().any(|&w| !w.is_finite() || w <= 0.0)
        {
            return Err(Error::Config(
                "mixture weights must be positive, one per class".into(),
            ));
        }
        Ok(())
    }
}

fn categorical(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if target < cum {
            return i;
        }
    }
    weights.len() - 1
}

/// Draw `n` labeled samples from the mixture, deterministically per seed.
pub fn generate_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let dim = spec.feature_dim();
    let total: f64 = spec.weights.iter().sum();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = categorical(&spec.weights, total, rng.random::<f64>());
        for j in 0..dim {
            features[(i, j)] = spec.means[class][j] + spec.stds[class] * normal.sample(&mut rng);
        }
        labels.push(class);
    }
    LabeledDataset::new(features, labels, spec.num_classes())
}

/// Split into disjoint (target_train, target_test, shadow_train, shadow_test)
/// index sets that exactly partition the dataset.
///
/// Fractions must be positive and sum to 1 within 1e-9; sizes come from
/// rounding the cumulative boundaries, so the four counts always sum to `n`.
/// Errors if any split rounds to zero samples.
pub fn split_disjoint(
    ds: &LabeledDataset,
    fractions: &[f64; 4],
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset, LabeledDataset)> {
    if fractions.iter().any(|&f| !f.is_finite() || f <= 0.0) {
        return Err(Error::Config("split fractions must be positive".into()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }
    let n = ds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);

    let mut boundaries = [0usize; 5];
    let mut cum = 0.0;
    for (i, &f) in fractions.iter().enumerate() {
        cum += f;
        boundaries[i + 1] = (cum * n as f64).round() as usize;
    }
    boundaries[4] = n;
    for w in boundaries.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "split fractions leave an empty split on {n} samples"
            )));
        }
    }
    let part = |lo: usize, hi: usize| ds.subset(&idx[lo..hi]);
    Ok((
        part(boundaries[0], boundaries[1]),
        part(boundaries[1], boundaries[2]),
        part(boundaries[2], boundaries[3]),
        part(boundaries[3], boundaries[4]),
    ))
}

/// Per-feature standardization statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-feature mean and (population) std, floored at [`STD_FLOOR`].
pub fn compute_stats(train: &LabeledDataset) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = train.len() as f64;
    let mean: Vec<f64> = train
        .features
        .mean_axis(Axis(0))
        .expect("nonempty")
        .to_vec();
    let std: Vec<f64> = (0..train.feature_dim())
        .map(|j| {
            let var = train
                .features
                .column(j)
                .iter()
                .map(|&v| (v - mean[j]) * (v - mean[j]))
                .sum::<f64>()
                / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    Ok(NormStats { mean, std })
}

/// Standard score `z = (x - mean) / std` with the given (training) stats.
pub fn normalize(ds: &LabeledDataset, stats: &NormStats) -> Result<LabeledDataset> {
    if stats.mean.len() != ds.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.feature_dim(),
            actual: stats.mean.len(),
        });
    }
    let mut features = ds.features.clone();
    for (j, mut col) in features.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| (v - stats.mean[j]) / stats.std[j]);
    }
    Ok(LabeledDataset {
        features,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    })
}

/// Inverse of [`normalize`] with the same stats.
pub fn denormalize(ds: &LabeledDataset, stats: &NormStats) -> Result<LabeledDataset> {
    if stats.mean.len() != ds.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.feature_dim(),
            actual: stats.mean.len(),
        });
    }
    let mut features = ds.features.clone();
    for (j, mut col) in features.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v * stats.std[j] + stats.mean[j]);
    }
    Ok(LabeledDataset {
        features,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    })
}

/// Feature transforms that build non-member datasets from a base dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    /// Fresh random permutation of each sample's features.
    Permute { seed: u64 },
    /// Multiply all features by `delta > 0`.
    Scale { delta: f64 },
    /// Add a fixed offset vector to every sample.
    Shift { offset: Vec<f64> },
    /// Replace features with uniform noise over `[low, high)`.
    UniformNoise { low: f64, high: f64, seed: u64 },
}

/// Apply a [`TransformSpec`] to a dataset.
pub fn apply_transform(ds: &LabeledDataset, spec: &TransformSpec) -> Result<LabeledDataset> {
    match spec {
        TransformSpec::Permute { seed } => Ok(make_permuted(ds, *seed)),
        TransformSpec::Scale { delta } => make_scaled(ds, *delta),
        TransformSpec::Shift { offset } => make_shifted(ds, offset),
        TransformSpec::UniformNoise { low, high, seed } => {
            make_uniform_noise(ds, *low, *high, *seed)
        }
    }
}

/// Permute each sample's features independently (fresh seeded permutation per
/// row). Per-row value multisets are preserved exactly.
pub fn make_permuted(ds: &LabeledDataset, seed: u64) -> LabeledDataset {
    let m = ds.feature_dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features = ds.features.clone();
    let mut perm: Vec<usize> = (0..m).collect();
    for mut row in features.rows_mut() {
        perm.shuffle(&mut rng);
        let original = row.to_vec();
        for (j, &p) in perm.iter().enumerate() {
            row[j] = original[p];
        }
    }
    LabeledDataset {
        features,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    }
}

/// Multiply every feature by `delta` (labels unchanged). Callers pass an
/// already-normalized dataset when reproducing the scaled construction.
pub fn make_scaled(ds: &LabeledDataset, delta: f64) -> Result<LabeledDataset> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidValue(format!(
            "scale factor must be positive, got {delta}"
        )));
    }
    Ok(LabeledDataset {
        features: &ds.features * delta,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    })
}

/// Add `offset` to every sample (labels unchanged).
pub fn make_shifted(ds: &LabeledDataset, offset: &[f64]) -> Result<LabeledDataset> {
    if offset.len() != ds.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.feature_dim(),
            actual: offset.len(),
        });
    }
    let mut features = ds.features.clone();
    for mut row in features.rows_mut() {
        for (v, &o) in row.iter_mut().zip(offset) {
            *v += o;
        }
    }
    Ok(LabeledDataset {
        features,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    })
}

/// Replace features with uniform noise over `[low, high)`, keeping the shape
/// and labels of the reference dataset.
pub fn make_uniform_noise(
    ds: &LabeledDataset,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !low.is_finite() || !high.is_finite() || low >= high {
        return Err(Error::InvalidValue(format!(
            "noise bounds must satisfy low < high, got [{low}, {high})"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let features = Array2::from_shape_fn((ds.len(), ds.feature_dim()), |_| {
        rng.random_range(low..high)
    });
    Ok(LabeledDataset {
        features,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
    })
}

/// Global min/max over all features; used to bound the uniform-noise analog.
pub fn feature_bounds(ds: &LabeledDataset) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in ds.features.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Generative stand-in: fit a diagonal-covariance Gaussian per class by
/// maximum likelihood and draw `n` fresh samples, cycling classes so the
/// output is balanced. Each class needs at least 2 training samples.
pub fn make_fake(train: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset> {
    let d = train.num_classes;
    let m = train.feature_dim();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (i, &label) in train.labels.iter().enumerate() {
        by_class[label].push(i);
    }
    if let Some(class) = by_class.iter().position(|idx| idx.len() < 2) {
        return Err(Error::InvalidValue(format!(
            "class {class} has fewer than 2 samples"
        )));
    }

    let mut means = vec![vec![0.0; m]; d];
    let mut stds = vec![vec![0.0; m]; d];
    for (c, idx) in by_class.iter().enumerate() {
        let count = idx.len() as f64;
        for &i in idx {
            for (j, v) in means[c].iter_mut().enumerate() {
                *v += train.features[(i, j)];
            }
        }
        for v in &mut means[c] {
            *v /= count;
        }
        for &i in idx {
            for (j, v) in stds[c].iter_mut().enumerate() {
                let diff = train.features[(i, j)] - means[c][j];
                *v += diff * diff;
            }
        }
        for v in &mut stds[c] {
            *v = (*v / count).sqrt().max(STD_FLOOR);
        }
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, m));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % d;
        for j in 0..m {
            features[(i, j)] = means[c][j] + stds[c][j] * normal.sample(&mut rng);
        }
        labels.push(c);
    }
    LabeledDataset::new(features, labels, d)
}
