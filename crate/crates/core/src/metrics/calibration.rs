//! Expected calibration error and overconfidence error.
//!
//! Samples are binned into `K` equal-width score intervals; each bin
//! contributes `|B|/N * |acc(B) - score(B)|` to ECE and
//! `|B|/N * score(B) * max(score(B) - acc(B), 0)` to OE. `acc` is the
//! argmax accuracy inside the bin and `score` the mean binning score.
//!
//! The default binning key is the predicted score of the true class; the
//! max-confidence convention is available behind [`BinningKey::MaxScore`].
//! A score of exactly 1.0 lands in the top bin.

use crate::error::{Error, Result};
use crate::nn::ScoreVector;

pub const DEFAULT_CALIBRATION_BINS: usize = 15;

/// Which per-sample score drives the binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinningKey {
    /// Predicted score of the sample's true class.
    TrueClassScore,
    /// Maximum predicted score (common ECE convention).
    MaxScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub count: usize,
    /// Argmax accuracy within the bin (0 for an empty bin).
    pub accuracy: f64,
    /// Mean binning score within the bin (0 for an empty bin).
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBinning {
    pub num_bins: usize,
    pub total: usize,
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationBinning {
    pub fn ece(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| {
                (b.count as f64 / self.total as f64) * (b.accuracy - b.mean_score).abs()
            })
            .sum()
    }

    pub fn oe(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| {
                (b.count as f64 / self.total as f64)
                    * b.mean_score
                    * (b.mean_score - b.accuracy).max(0.0)
            })
            .sum()
    }
}

/// Bin samples by their calibration score.
pub fn calibration_binning(
    score_vectors: &[ScoreVector],
    true_labels: &[usize],
    num_bins: usize,
    key: BinningKey,
) -> Result<CalibrationBinning> {
    if score_vectors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if score_vectors.len() != true_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: score_vectors.len(),
            actual: true_labels.len(),
        });
    }
    if num_bins == 0 {
        return Err(Error::InvalidValue("need at least one bin".into()));
    }
    let mut counts = vec![0usize; num_bins];
    let mut correct = vec![0usize; num_bins];
    let mut score_sum = vec![0.0f64; num_bins];
    for (sv, &label) in score_vectors.iter().zip(true_labels) {
        if label >= sv.dim() {
            return Err(Error::InvalidValue(format!(
                "label {label} out of range for {} classes",
                sv.dim()
            )));
        }
        let score = match key {
            BinningKey::TrueClassScore => sv.scores()[label],
            BinningKey::MaxScore => sv.max_score(),
        };
        let bin = ((score * num_bins as f64).floor() as usize).min(num_bins - 1);
        counts[bin] += 1;
        score_sum[bin] += score;
        if sv.argmax() == label {
            correct[bin] += 1;
        }
    }
    let bins = (0..num_bins)
        .map(|k| {
            if counts[k] == 0 {
                CalibrationBin {
                    count: 0,
                    accuracy: 0.0,
                    mean_score: 0.0,
                }
            } else {
                CalibrationBin {
                    count: counts[k],
                    accuracy: correct[k] as f64 / counts[k] as f64,
                    mean_score: score_sum[k] / counts[k] as f64,
                }
            }
        })
        .collect();
    Ok(CalibrationBinning {
        num_bins,
        total: score_vectors.len(),
        bins,
    })
}

/// ECE with the paper-faithful true-class-score binning.
pub fn ece(score_vectors: &[ScoreVector], true_labels: &[usize], num_bins: usize) -> Result<f64> {
    ece_with_key(score_vectors, true_labels, num_bins, BinningKey::TrueClassScore)
}

pub fn ece_with_key(
    score_vectors: &[ScoreVector],
    true_labels: &[usize],
    num_bins: usize,
    key: BinningKey,
) -> Result<f64> {
    Ok(calibration_binning(score_vectors, true_labels, num_bins, key)?.ece())
}

/// Overconfidence error with the same binning as [`ece`].
pub fn oe(score_vectors: &[ScoreVector], true_labels: &[usize], num_bins: usize) -> Result<f64> {
    oe_with_key(score_vectors, true_labels, num_bins, BinningKey::TrueClassScore)
}

pub fn oe_with_key(
    score_vectors: &[ScoreVector],
    true_labels: &[usize],
    num_bins: usize,
    key: BinningKey,
) -> Result<f64> {
    Ok(calibration_binning(score_vectors, true_labels, num_bins, key)?.oe())
}
