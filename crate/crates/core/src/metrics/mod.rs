//! Attack-evaluation metrics.
//!
//! Confusion-based rates, ROC/PR curves, MMPS, calibration errors, 1-D earth
//! mover's distance, and Gaussian KDE. All functions are pure; AUROC is
//! computed so that it equals the pair-counting statistic (ties weighted
//! one half) exactly, not just within float tolerance.

mod calibration;
mod distribution;
mod report;

pub use calibration::{
    calibration_binning, ece, ece_with_key, oe, oe_with_key, BinningKey, CalibrationBin,
    CalibrationBinning, DEFAULT_CALIBRATION_BINS,
};
pub use distribution::{emd_1d, kde_gaussian, linear_grid, scott_bandwidth};
pub use report::{evaluate_attack, EvalReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ScoreVector;

/// Binary confusion counts; the four entries sum to the number of records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

/// A rate together with a flag marking division-by-zero conventions
/// (empty denominators evaluate to 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub degenerate: bool,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// `TP / (TP + FP)`; 0 (degenerate) when no positives were predicted.
    pub fn precision(&self) -> Rate {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// `TP / (TP + FN)`; 0 (degenerate) when there are no positive records.
    pub fn recall(&self) -> Rate {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// `FP / (FP + TN)`; 0 (degenerate) when there are no negative records.
    pub fn fpr(&self) -> Rate {
        ratio(self.false_positives, self.false_positives + self.true_negatives)
    }
}

fn ratio(num: u64, den: u64) -> Rate {
    if den == 0 {
        Rate {
            value: 0.0,
            degenerate: true,
        }
    } else {
        Rate {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }
}

/// Count the confusion matrix of binary decisions against ground truth.
pub fn confusion(decisions: &[bool], truths: &[bool]) -> Result<ConfusionCounts> {
    if decisions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: decisions.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&d, &t) in decisions.iter().zip(truths) {
        match (d, t) {
            (true, true) => counts.true_positives += 1,
            (true, false) => counts.false_positives += 1,
            (false, false) => counts.true_negatives += 1,
            (false, true) => counts.false_negatives += 1,
        }
    }
    Ok(counts)
}

/// ROC curve from a threshold sweep over raw scores (higher score means
/// "more member"). Points run from (0, 0) to (1, 1) with both coordinates
/// nondecreasing; tied scores collapse into a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` points.
    pub points: Vec<(f64, f64)>,
    /// Cumulative `(false positives, true positives)` behind each point.
    cumulative: Vec<(u64, u64)>,
    n_pos: u64,
    n_neg: u64,
}

impl RocCurve {
    pub fn n_pos(&self) -> u64 {
        self.n_pos
    }

    pub fn n_neg(&self) -> u64 {
        self.n_neg
    }
}

pub fn roc_curve(raw_scores: &[f64], truths: &[bool]) -> Result<RocCurve> {
    if raw_scores.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: raw_scores.len(),
        });
    }
    let n_pos = truths.iter().filter(|&&t| t).count() as u64;
    let n_neg = truths.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..raw_scores.len()).collect();
    order.sort_by(|&a, &b| raw_scores[b].total_cmp(&raw_scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut cumulative = vec![(0u64, 0u64)];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = raw_scores[order[i]];
        while i < order.len() && raw_scores[order[i]] == score {
            if truths[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        cumulative.push((fp, tp));
    }
    Ok(RocCurve {
        points,
        cumulative,
        n_pos,
        n_neg,
    })
}

/// Area under the ROC curve by trapezoidal integration, carried out on the
/// integer cumulative counts so the result equals the pair-counting
/// probability `P(score_member > score_nonmember) + P(tie)/2` exactly.
pub fn auroc(curve: &RocCurve) -> f64 {
    let mut twice_area: u128 = 0;
    for w in curve.cumulative.windows(2) {
        let (fp0, tp0) = w[0];
        let (fp1, tp1) = w[1];
        twice_area += (fp1 - fp0) as u128 * (tp0 + tp1) as u128;
    }
    twice_area as f64 / (2 * curve.n_pos * curve.n_neg) as f64
}

/// Area under the precision-recall curve with step-wise (right-continuous)
/// precision interpolation over descending score thresholds.
pub fn auprc(raw_scores: &[f64], truths: &[bool]) -> Result<f64> {
    if raw_scores.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: raw_scores.len(),
        });
    }
    let n_pos = truths.iter().filter(|&&t| t).count() as u64;
    if n_pos == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..raw_scores.len()).collect();
    order.sort_by(|&a, &b| raw_scores[b].total_cmp(&raw_scores[a]));

    let mut area = 0.0;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = raw_scores[order[i]];
        let mut d_tp = 0u64;
        while i < order.len() && raw_scores[order[i]] == score {
            if truths[order[i]] {
                d_tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        tp += d_tp;
        if d_tp > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            area += (d_tp as f64 / n_pos as f64) * precision;
        }
    }
    Ok(area)
}

/// Minimum FPR among curve points whose TPR reaches the target.
pub fn fpr_at_tpr(curve: &RocCurve, target_tpr: f64) -> f64 {
    for &(fpr, tpr) in &curve.points {
        if tpr >= target_tpr {
            return fpr;
        }
    }
    1.0
}

/// Mean maximum prediction score over a set of score vectors.
pub fn mmps(score_vectors: &[ScoreVector]) -> Result<f64> {
    if score_vectors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(score_vectors.iter().map(|s| s.max_score()).sum::<f64>() / score_vectors.len() as f64)
}
