//! Attack preparation protocol: train target and shadow models identically
//! on disjoint splits, query the shadow, and assemble balanced membership
//! records for attack fitting.
//!
//! One master seed drives everything. Per-stage seeds are derived by mixing
//! the stage index into the master seed with a splitmix64 finalizer (see
//! [`stage_seed`]), so each stage is independently reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::Top3TrainConfig;
use crate::data::{
    compute_stats, generate_mixture, normalize, split_disjoint, LabeledDataset, MixtureSpec,
    NormStats,
};
use crate::error::{Error, Result};
use crate::nn::{
    EpochStats, Network, NetworkConfig, ScoreVector, TemperatureConfig, TrainConfig,
};

/// Provenance tags used by the pipeline.
pub mod tags {
    pub const SHADOW_TRAIN: &str = "shadow_train";
    pub const SHADOW_TEST: &str = "shadow_test";
    pub const TARGET_TRAIN: &str = "target_train";
}

/// Stage indices for [`stage_seed`].
pub mod stage {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const MODEL_INIT: u64 = 3;
    pub const TRAIN_SHUFFLE: u64 = 4;
    pub const BALANCE: u64 = 5;
    pub const ATTACK_FIT: u64 = 6;
    pub const EVAL_MEMBERS: u64 = 7;
    pub const SWEEP_DATA: u64 = 8;
    /// Base for per-evaluation-dataset seeds; add the dataset index.
    pub const EVAL_DATASET_BASE: u64 = 100;
}

/// Derive the seed for one pipeline stage from the master seed:
/// `splitmix64(master ^ (stage * 0x9E3779B97F4A7C15))`.
pub fn stage_seed(master_seed: u64, stage: u64) -> u64 {
    let mut z = master_seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One attack training/evaluation unit: the prediction-score vector a model
/// produced for a sample, the ground-truth membership flag, and a provenance
/// tag naming the dataset the sample came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRecord {
    pub scores: ScoreVector,
    pub is_member: bool,
    pub source_tag: String,
}

/// Synthetic member-distribution parameters: class means on a circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub circle_radius: f64,
    pub class_std: f64,
    /// Total samples before the four-way split.
    pub total_samples: usize,
}

impl DataConfig {
    pub fn mixture_spec(&self) -> Result<MixtureSpec> {
        MixtureSpec::circle(
            self.num_classes,
            self.feature_dim,
            self.circle_radius,
            self.class_std,
        )
    }
}

/// One evaluation dataset in the non-member suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalDatasetSpec {
    /// Held-out target test split.
    Heldout,
    /// Fresh samples from per-class Gaussians fitted on the target train split.
    Fake { n: Option<usize> },
    /// Held-out split shifted by a constant offset in every feature.
    Shifted { offset: f64 },
    /// Uniform noise over the normalized training bounding box (or explicit bounds).
    Noise { low: Option<f64>, high: Option<f64> },
    /// Held-out split with per-sample feature permutations.
    Permuted,
    /// Held-out split scaled by `delta` after normalization.
    Scaled { delta: f64 },
}

impl EvalDatasetSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            EvalDatasetSpec::Heldout => "heldout",
            EvalDatasetSpec::Fake { .. } => "fake",
            EvalDatasetSpec::Shifted { .. } => "shifted",
            EvalDatasetSpec::Noise { .. } => "noise",
            EvalDatasetSpec::Permuted => "permuted",
            EvalDatasetSpec::Scaled { .. } => "scaled",
        }
    }
}

/// Input-scaling sweep parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Fresh non-member samples drawn for the sweep.
    pub n_samples: usize,
    /// Ascending positive scale factors.
    pub deltas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_samples: 500,
            deltas: vec![1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6],
        }
    }
}

/// Complete experiment description. Everything a run needs is derived from
/// this struct plus the master seed; `training.seed` is overwritten with a
/// stage seed so the config file never has to carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub training: TrainConfig,
    /// Softmax temperature applied when querying either model.
    #[serde(default)]
    pub temperature: TemperatureConfig,
    pub data: DataConfig,
    /// (target_train, target_test, shadow_train, shadow_test) fractions.
    pub split_fractions: [f64; 4],
    /// Member and non-member evaluation subsets share this size.
    pub eval_subset_size: usize,
    #[serde(default)]
    pub attack: Top3TrainConfig,
    #[serde(default = "default_eval_datasets")]
    pub eval_datasets: Vec<EvalDatasetSpec>,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub master_seed: u64,
    /// Optional default output directory; the CLI `--out` flag wins.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_eval_datasets() -> Vec<EvalDatasetSpec> {
    vec![
        EvalDatasetSpec::Heldout,
        EvalDatasetSpec::Fake { n: None },
        EvalDatasetSpec::Shifted { offset: 1.5 },
        EvalDatasetSpec::Noise {
            low: None,
            high: None,
        },
        EvalDatasetSpec::Permuted,
        EvalDatasetSpec::Scaled { delta: 1e6 },
    ]
}

impl ExperimentConfig {
    /// Defaults tuned so a full run finishes in seconds on a laptop while
    /// still producing the overfitting regime the audit studies: train
    /// accuracy at 100%, a 25-40 point train-test gap, and strongly
    /// overconfident scores on held-out and out-of-distribution inputs.
    ///
    /// The class means sit on a circle in the first two of eight feature
    /// dimensions; the extra noise dimensions isolate training points from
    /// each other, which is what lets a small dense net memorize them the
    /// way large image models memorize their training sets.
    pub fn default_desk_scale() -> Self {
        ExperimentConfig {
            network: NetworkConfig {
                input_dim: 8,
                hidden_dims: vec![64, 64],
                num_classes: 8,
                activation: crate::nn::Activation::leaky_default(),
            },
            training: TrainConfig {
                epochs: 100,
                batch_size: 16,
                optimizer: crate::nn::OptimizerSpec::adam(0.005),
                label_smoothing: 0.0,
                l2_lambda: 0.0,
                seed: 0,
            },
            temperature: TemperatureConfig::none(),
            data: DataConfig {
                num_classes: 8,
                feature_dim: 8,
                circle_radius: 3.0,
                class_std: 1.0,
                total_samples: 480,
            },
            split_fractions: [0.25, 0.25, 0.25, 0.25],
            eval_subset_size: 100,
            attack: Top3TrainConfig::default(),
            eval_datasets: default_eval_datasets(),
            sweep: SweepConfig::default(),
            master_seed: 42,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate_classifier()?;
        self.training.validate()?;
        if self.network.num_classes != self.data.num_classes {
            return Err(Error::Config(format!(
                "network num_classes {} != data num_classes {}",
                self.network.num_classes, self.data.num_classes
            )));
        }
        if self.network.input_dim != self.data.feature_dim {
            return Err(Error::Config(format!(
                "network input_dim {} != data feature_dim {}",
                self.network.input_dim, self.data.feature_dim
            )));
        }
        self.data.mixture_spec()?;
        if self.eval_subset_size == 0 {
            return Err(Error::Config("eval_subset_size must be positive".into()));
        }
        if self.eval_datasets.is_empty() {
            return Err(Error::Config("eval_datasets must not be empty".into()));
        }
        if self.sweep.deltas.is_empty()
            || self.sweep.deltas.iter().any(|&d| !d.is_finite() || d <= 0.0)
            || self.sweep.deltas.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "sweep deltas must be positive and strictly ascending".into(),
            ));
        }
        if self.sweep.n_samples == 0 {
            return Err(Error::Config("sweep n_samples must be positive".into()));
        }
        Ok(())
    }
}

/// The four normalized splits of one experiment.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub target_train: LabeledDataset,
    pub target_test: LabeledDataset,
    pub shadow_train: LabeledDataset,
    pub shadow_test: LabeledDataset,
}

/// Output of the preparation protocol.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub target: Network,
    pub shadow: Network,
    pub target_history: Vec<EpochStats>,
    pub shadow_history: Vec<EpochStats>,
    /// Balanced shadow-derived records for attack fitting.
    pub attack_training: Vec<MembershipRecord>,
    /// Normalized splits (training statistics applied everywhere).
    pub splits: SplitSet,
    /// Raw (unnormalized) splits, as persisted to CSV.
    pub raw_splits: SplitSet,
    pub stats: NormStats,
}

/// Run the preparation protocol: generate data, split, normalize on the
/// target-train statistics, train target and shadow with byte-identical
/// configs on disjoint splits, and build balanced attack-training records
/// from the shadow's splits.
pub fn run_preparation(config: &ExperimentConfig) -> Result<Preparation> {
    config.validate()?;
    let master = config.master_seed;

    let spec = config.data.mixture_spec()?;
    let pool = generate_mixture(&spec, config.data.total_samples, stage_seed(master, stage::DATA))?;
    let (tt_raw, te_raw, st_raw, se_raw) =
        split_disjoint(&pool, &config.split_fractions, stage_seed(master, stage::SPLIT))?;

    if config.eval_subset_size > tt_raw.len() || config.eval_subset_size > te_raw.len() {
        return Err(Error::Config(format!(
            "eval_subset_size {} exceeds a split of {} / {} samples",
            config.eval_subset_size,
            tt_raw.len(),
            te_raw.len()
        )));
    }

    let stats = compute_stats(&tt_raw)?;
    let splits = SplitSet {
        target_train: normalize(&tt_raw, &stats)?,
        target_test: normalize(&te_raw, &stats)?,
        shadow_train: normalize(&st_raw, &stats)?,
        shadow_test: normalize(&se_raw, &stats)?,
    };

    // identical TrainConfig (including the shuffle seed) for both models
    let mut training = config.training.clone();
    training.seed = stage_seed(master, stage::TRAIN_SHUFFLE);
    let init_seed = stage_seed(master, stage::MODEL_INIT);

    let mut target = crate::nn::init_network(&config.network, init_seed)?;
    let target_history = crate::nn::train(&mut target, &splits.target_train, &training)?;
    let mut shadow = crate::nn::init_network(&config.network, init_seed)?;
    let shadow_history = crate::nn::train(&mut shadow, &splits.shadow_train, &training)?;

    let mut records = collect_records(
        &shadow,
        &splits.shadow_train,
        true,
        config.temperature,
        tags::SHADOW_TRAIN,
    )?;
    records.extend(collect_records(
        &shadow,
        &splits.shadow_test,
        false,
        config.temperature,
        tags::SHADOW_TEST,
    )?);
    let attack_training = balance(&records, stage_seed(master, stage::BALANCE))?;
    debug_assert!(attack_training
        .iter()
        .all(|r| r.source_tag.starts_with("shadow")));

    Ok(Preparation {
        target,
        shadow,
        target_history,
        shadow_history,
        attack_training,
        splits,
        raw_splits: SplitSet {
            target_train: tt_raw,
            target_test: te_raw,
            shadow_train: st_raw,
            shadow_test: se_raw,
        },
        stats,
    })
}

/// Query a model on a dataset and label every score vector with the given
/// membership flag and provenance tag, order-preserving.
pub fn collect_records(
    model: &Network,
    dataset: &LabeledDataset,
    is_member: bool,
    temp: TemperatureConfig,
    tag: &str,
) -> Result<Vec<MembershipRecord>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = crate::nn::predict_scores(model, &dataset.features, temp)?;
    Ok(scores
        .into_iter()
        .map(|scores| MembershipRecord {
            scores,
            is_member,
            source_tag: tag.to_string(),
        })
        .collect())
}

/// Equalize member and non-member counts by seeded subsampling of the larger
/// class; relative order is preserved.
pub fn balance(records: &[MembershipRecord], seed: u64) -> Result<Vec<MembershipRecord>> {
    let members: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].is_member)
        .collect();
    let nonmembers: Vec<usize> = (0..records.len())
        .filter(|&i| !records[i].is_member)
        .collect();
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::SingleClass);
    }
    let keep = members.len().min(nonmembers.len());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let subsample = |idx: &[usize], rng: &mut ChaCha20Rng| {
        let mut shuffled = idx.to_vec();
        shuffled.shuffle(rng);
        let mut kept: Vec<usize> = shuffled.into_iter().take(keep).collect();
        kept.sort_unstable();
        kept
    };
    let kept_members = subsample(&members, &mut rng);
    let kept_nonmembers = subsample(&nonmembers, &mut rng);
    Ok(kept_members
        .into_iter()
        .chain(kept_nonmembers)
        .map(|i| records[i].clone())
        .collect())
}

/// Write records as CSV: `s0,...,s{d-1},is_member,tag`.
pub fn save_records(records: &[MembershipRecord], path: &Path) -> Result<()> {
    let d = records.first().map_or(0, |r| r.scores.dim());
    let mut out = String::new();
    for j in 0..d {
        let _ = write!(out, "s{j},");
    }
    out.push_str("is_member,tag\n");
    for r in records {
        if r.source_tag.contains(',') || r.source_tag.contains('\n') {
            return Err(Error::InvalidValue(format!(
                "tag `{}` must not contain commas or newlines",
                r.source_tag
            )));
        }
        for v in r.scores.scores() {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{},{}", u8::from(r.is_member), r.source_tag);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read records written by [`save_records`].
pub fn load_records(path: &Path) -> Result<Vec<MembershipRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if fields.len() < 3 || fields[fields.len() - 2] != "is_member" || fields[fields.len() - 1] != "tag"
    {
        return Err(err(1, "malformed header".into()));
    }
    let d = fields.len() - 2;
    let mut records = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line_no = i + 2;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != d + 2 {
            return Err(err(
                line_no,
                format!("expected {} columns, found {}", d + 2, cells.len()),
            ));
        }
        let mut scores = Vec::with_capacity(d);
        for cell in &cells[..d] {
            scores.push(
                cell.parse::<f64>()
                    .map_err(|_| err(line_no, format!("non-numeric score `{cell}`")))?,
            );
        }
        let is_member = match cells[d] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(err(line_no, format!("bad is_member value `{other}`"))),
        };
        records.push(MembershipRecord {
            scores: ScoreVector::new(scores)
                .map_err(|e| err(line_no, e.to_string()))?,
            is_member,
            source_tag: cells[d + 1].to_string(),
        });
    }
    Ok(records)
}
