//! The three score-based membership inference attacks and the input-scaling
//! sweep.
//!
//! Threshold attacks (maximum score, entropy) pick the cutoff that maximizes
//! Youden's J = TPR - FPR over a candidate grid of midpoints between adjacent
//! observed statistic values plus accept-all / reject-all sentinels; ties go
//! to the candidate with the lowest FPR. The top-3 attack is a 3-64-1 ReLU
//! MLP with a sigmoid output, trained with Adam on binary cross-entropy and
//! an early-stopping patience rule.

mod persist;

pub use persist::{load_attack, save_attack};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_scaled, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{
    init_network, optimizer_step, predict_scores, Activation, Network, NetworkConfig,
    OptimizerSpec, OptimizerState, ScoreVector, TemperatureConfig, LOG_FLOOR,
};
use crate::shadow::{stage_seed, MembershipRecord};

/// Shannon entropy of a score vector in nats, with `0 * ln 0 := 0`.
/// Ranges over `[0, ln d]`.
pub fn entropy(s: &ScoreVector) -> f64 {
    -s.scores()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// The three highest scores in descending order, zero-padded when `d < 3`.
pub fn top3_features(s: &ScoreVector) -> [f64; 3] {
    let mut sorted = s.scores().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = [0.0; 3];
    for (slot, v) in out.iter_mut().zip(sorted) {
        *slot = v;
    }
    out
}

/// Which statistic a threshold attack cuts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatistic {
    /// Member if the maximum score is at least tau.
    MaxScore,
    /// Member if the entropy is at most tau.
    Entropy,
}

/// A fitted single-threshold attack.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdAttack {
    pub statistic: ThresholdStatistic,
    pub tau: f64,
}

impl ThresholdAttack {
    fn statistic_of(&self, s: &ScoreVector) -> f64 {
        match self.statistic {
            ThresholdStatistic::MaxScore => s.max_score(),
            ThresholdStatistic::Entropy => entropy(s),
        }
    }

    pub fn decide(&self, s: &ScoreVector) -> bool {
        match self.statistic {
            ThresholdStatistic::MaxScore => self.statistic_of(s) >= self.tau,
            ThresholdStatistic::Entropy => self.statistic_of(s) <= self.tau,
        }
    }
}

/// Candidate thresholds for a statistic: midpoints between adjacent sorted
/// distinct values plus boundary sentinels, covering every achievable
/// confusion matrix. The observed values themselves are included as well;
/// when two adjacent statistics are so close that their midpoint rounds onto
/// an endpoint, the raw value still reaches the confusion matrix the midpoint
/// was meant to hit.
fn candidate_thresholds(values: &[f64], statistic: ThresholdStatistic) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = Vec::with_capacity(2 * sorted.len() + 1);
    candidates.extend_from_slice(&sorted);
    for w in sorted.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    match statistic {
        ThresholdStatistic::MaxScore => {
            // reject-all sentinel, kept inside the [1/d, 1] domain
            let top = *sorted.last().expect("nonempty");
            if top < 1.0 {
                candidates.push(0.5 * (top + 1.0));
            }
        }
        ThresholdStatistic::Entropy => {
            // reject-all sentinel, kept nonnegative
            if sorted[0] > 0.0 {
                candidates.push(0.5 * sorted[0]);
            }
        }
    }
    candidates
}

/// Shared threshold search: maximize TPR - FPR over the candidate grid.
/// Among maximizers, the candidate with the lowest FPR wins (for the
/// max-score direction that is the largest tau, for entropy the smallest).
fn fit_threshold(
    records: &[MembershipRecord],
    statistic: ThresholdStatistic,
) -> Result<ThresholdAttack> {
    let n_members = records.iter().filter(|r| r.is_member).count();
    let n_nonmembers = records.len() - n_members;
    if n_members == 0 || n_nonmembers == 0 {
        return Err(Error::SingleClass);
    }
    let stat = |r: &MembershipRecord| match statistic {
        ThresholdStatistic::MaxScore => r.scores.max_score(),
        ThresholdStatistic::Entropy => entropy(&r.scores),
    };
    let values: Vec<f64> = records.iter().map(stat).collect();

    // sort values with membership so each candidate's TPR/FPR comes from
    // prefix counts rather than a full pass
    let mut pairs: Vec<(f64, bool)> = values
        .iter()
        .copied()
        .zip(records.iter().map(|r| r.is_member))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum_members = vec![0usize];
    let mut cum_nonmembers = vec![0usize];
    for &(_, m) in &pairs {
        cum_members.push(cum_members.last().unwrap() + usize::from(m));
        cum_nonmembers.push(cum_nonmembers.last().unwrap() + usize::from(!m));
    }
    // members/nonmembers with value >= v, via binary search on the sorted values
    let counts_at_least = |v: f64| -> (usize, usize) {
        let idx = pairs.partition_point(|&(x, _)| x < v);
        (
            n_members - cum_members[idx],
            n_nonmembers - cum_nonmembers[idx],
        )
    };
    // members/nonmembers with value <= v
    let counts_at_most = |v: f64| -> (usize, usize) {
        let idx = pairs.partition_point(|&(x, _)| x <= v);
        (cum_members[idx], cum_nonmembers[idx])
    };

    let mut best: Option<(f64, f64, f64)> = None; // (j, fpr, tau)
    for tau in candidate_thresholds(&values, statistic) {
        let (tp, fp) = match statistic {
            ThresholdStatistic::MaxScore => counts_at_least(tau),
            ThresholdStatistic::Entropy => counts_at_most(tau),
        };
        let tpr = tp as f64 / n_members as f64;
        let fpr = fp as f64 / n_nonmembers as f64;
        let j = tpr - fpr;
        let better = match best {
            None => true,
            Some((bj, bf, _)) => j > bj || (j == bj && fpr < bf),
        };
        if better {
            best = Some((j, fpr, tau));
        }
    }
    let (_, _, tau) = best.expect("candidate grid is nonempty");
    Ok(ThresholdAttack { statistic, tau })
}

/// Fit the maximum-score threshold attack.
pub fn fit_max_score_threshold(records: &[MembershipRecord]) -> Result<ThresholdAttack> {
    fit_threshold(records, ThresholdStatistic::MaxScore)
}

/// Fit the entropy threshold attack.
pub fn fit_entropy_threshold(records: &[MembershipRecord]) -> Result<ThresholdAttack> {
    fit_threshold(records, ThresholdStatistic::Entropy)
}

/// Hyperparameters of the top-3 attack MLP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Top3TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Minimum epoch-loss improvement that resets the patience counter.
    pub min_delta: f64,
    /// Consecutive epochs without such an improvement before stopping.
    pub patience: usize,
    /// Hard cap on epochs.
    pub max_epochs: usize,
}

impl Default for Top3TrainConfig {
    fn default() -> Self {
        Top3TrainConfig {
            learning_rate: 0.01,
            batch_size: 16,
            min_delta: 5e-4,
            patience: 15,
            max_epochs: 500,
        }
    }
}

/// The top-3 attack: a 3-64-1 ReLU MLP with sigmoid output and a fixed 0.5
/// decision cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Top3Attack {
    pub net: Network,
    pub cutoff: f64,
}

impl Top3Attack {
    /// Sigmoid membership probability for one score vector.
    pub fn predict_probability(&self, s: &ScoreVector) -> f64 {
        let feats = top3_features(s);
        let batch = Array2::from_shape_vec((1, 3), feats.to_vec()).expect("3 features");
        let logits = self.net.forward_logits(&batch).expect("3-input network");
        sigmoid(logits[(0, 0)])
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn attack_mlp_config() -> NetworkConfig {
    NetworkConfig {
        input_dim: 3,
        hidden_dims: vec![64],
        num_classes: 1,
        activation: Activation::Relu,
    }
}

/// Fit the top-3 attack with the default (paper) hyperparameters.
pub fn fit_top3(records: &[MembershipRecord], seed: u64) -> Result<Top3Attack> {
    fit_top3_with(records, seed, &Top3TrainConfig::default())
}

/// Fit the top-3 attack MLP: Adam on binary cross-entropy, seeded shuffling,
/// early stop once the best epoch-mean loss has not improved by `min_delta`
/// for `patience` consecutive epochs.
pub fn fit_top3_with(
    records: &[MembershipRecord],
    seed: u64,
    cfg: &Top3TrainConfig,
) -> Result<Top3Attack> {
    let n = records.len();
    let n_members = records.iter().filter(|r| r.is_member).count();
    if n_members == 0 || n_members == n {
        return Err(Error::SingleClass);
    }
    if cfg.batch_size == 0
        || !cfg.learning_rate.is_finite()
        || cfg.learning_rate <= 0.0
        || cfg.max_epochs == 0
    {
        return Err(Error::Config("invalid top-3 attack hyperparameters".into()));
    }

    let mut features = Array2::zeros((n, 3));
    let mut targets = Array1::zeros(n);
    for (i, r) in records.iter().enumerate() {
        let f = top3_features(&r.scores);
        for j in 0..3 {
            features[(i, j)] = f[j];
        }
        targets[i] = f64::from(u8::from(r.is_member));
    }

    let mut net = init_network(&attack_mlp_config(), stage_seed(seed, 1))?;
    let mut rng = ChaCha20Rng::seed_from_u64(stage_seed(seed, 2));
    let mut state = OptimizerState::new(&net);
    let optimizer = OptimizerSpec::adam(cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();

    let mut best_loss = f64::INFINITY;
    let mut stall = 0usize;
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = features.select(Axis(0), chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let trace = net.forward_trace(&batch)?;
            let logits = trace.pre_activations.last().expect("nonempty network");
            let b = chunk.len() as f64;
            let mut delta = Array2::zeros((chunk.len(), 1));
            let mut batch_loss = 0.0;
            for (i, &yi) in y.iter().enumerate() {
                let p = sigmoid(logits[(i, 0)]);
                batch_loss -= yi * p.max(LOG_FLOOR).ln()
                    + (1.0 - yi) * (1.0 - p).max(LOG_FLOOR).ln();
                delta[(i, 0)] = (p - yi) / b;
            }
            let grads = crate::nn::backprop_from_output_delta(&net, &trace, delta, 0.0);
            optimizer_step(&mut net, &grads, &mut state, &optimizer)?;
            epoch_loss += batch_loss;
        }
        epoch_loss /= n as f64;
        if best_loss - epoch_loss >= cfg.min_delta {
            best_loss = epoch_loss;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }
    Ok(Top3Attack { net, cutoff: 0.5 })
}

/// One of the three fitted attacks.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackModel {
    Entropy(ThresholdAttack),
    MaxScore(ThresholdAttack),
    Top3(Top3Attack),
}

impl AttackModel {
    pub fn name(&self) -> &'static str {
        match self {
            AttackModel::Entropy(_) => "entropy",
            AttackModel::MaxScore(_) => "max_score",
            AttackModel::Top3(_) => "top3",
        }
    }
}

/// Membership decision plus the continuous statistic behind it (maximum
/// score, negated entropy, or sigmoid output) for threshold-free metrics.
pub fn predict_membership(attack: &AttackModel, s: &ScoreVector) -> (bool, f64) {
    match attack {
        AttackModel::Entropy(t) => (t.decide(s), -entropy(s)),
        AttackModel::MaxScore(t) => (t.decide(s), s.max_score()),
        AttackModel::Top3(t) => {
            let p = t.predict_probability(s);
            (p >= t.cutoff, p)
        }
    }
}

/// One row of the scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub mean_max_score: f64,
    /// `(attack name, fraction classified as member)` per attack.
    pub member_fractions: Vec<(String, f64)>,
}

/// Scale a normalized non-member dataset by each delta and record the mean
/// maximum score plus the fraction each attack classifies as members.
pub fn scaling_sweep(
    net: &Network,
    attacks: &[AttackModel],
    nonmembers_normalized: &LabeledDataset,
    deltas: &[f64],
    temp: TemperatureConfig,
) -> Result<Vec<SweepRow>> {
    if nonmembers_normalized.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if deltas.is_empty() || deltas.iter().any(|&d| !d.is_finite() || d <= 0.0) {
        return Err(Error::InvalidValue("deltas must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidValue("deltas must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let scaled = make_scaled(nonmembers_normalized, delta)?;
        let scores = predict_scores(net, &scaled.features, temp)?;
        let n = scores.len() as f64;
        let mean_max_score = scores.iter().map(|s| s.max_score()).sum::<f64>() / n;
        let member_fractions = attacks
            .iter()
            .map(|attack| {
                let hits = scores
                    .iter()
                    .filter(|s| predict_membership(attack, s).0)
                    .count();
                (attack.name().to_string(), hits as f64 / n)
            })
            .collect();
        rows.push(SweepRow {
            delta,
            mean_max_score,
            member_fractions,
        });
    }
    Ok(rows)
}
