//! The `generate-data` and `run` commands.

use std::fs;
use std::path::{Path, PathBuf};

use mia_core::attacks::{
    fit_entropy_threshold, fit_max_score_threshold, fit_top3_with, save_attack, AttackModel,
};
use mia_core::data::{
    feature_bounds, generate_mixture, make_fake, make_permuted, make_scaled, make_shifted,
    make_uniform_noise, save_csv, split_disjoint, LabeledDataset,
};
use mia_core::metrics::{
    ece, ece_with_key, evaluate_attack, oe, oe_with_key, BinningKey, EvalReport,
    DEFAULT_CALIBRATION_BINS,
};
use mia_core::nn::{accuracy, predict_scores, save_network};
use mia_core::shadow::{
    balance, collect_records, run_preparation, save_records, stage, stage_seed, tags,
    EvalDatasetSpec, ExperimentConfig, MembershipRecord, Preparation,
};

use crate::config::{config_json, config_sha256};
use crate::manifest::RunManifest;
use crate::scenario::ScenarioSpec;
use crate::{io_runtime, CliError, CliResult};

/// Everything a completed run exposes to callers (the files hold the same
/// content).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: String,
    pub out_dir: PathBuf,
    pub reports: Vec<EvalReport>,
    pub target_train_accuracy: f64,
    pub target_test_accuracy: f64,
    pub shadow_train_accuracy: f64,
    pub shadow_test_accuracy: f64,
    /// Model calibration on the held-out evaluation subset (true-class-score
    /// binning, the reported default).
    pub ece_heldout: f64,
    pub oe_heldout: f64,
    /// The same errors under max-confidence binning.
    pub ece_max_heldout: f64,
    pub oe_max_heldout: f64,
}

fn mkdirs(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_runtime("creating output directory", e))
}

/// `generate-data`: write the four raw splits plus the normalization stats.
pub fn execute_generate_data(config: &ExperimentConfig, out_dir: &Path) -> CliResult<()> {
    mkdirs(out_dir)?;
    let mut manifest = RunManifest::new(
        "generate-data",
        "standard",
        config.master_seed,
        config_sha256(config),
    );
    let result = generate_data_stages(config, out_dir, &mut manifest);
    manifest.write(out_dir)?;
    result
}

fn generate_data_stages(
    config: &ExperimentConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> CliResult<()> {
    let master = config.master_seed;
    let splits = manifest.stage("generate", |_m| {
        let spec = config.data.mixture_spec()?;
        let pool = generate_mixture(&spec, config.data.total_samples, stage_seed(master, stage::DATA))?;
        let parts = split_disjoint(&pool, &config.split_fractions, stage_seed(master, stage::SPLIT))?;
        Ok(parts)
    })?;
    manifest.stage("persist", |_m| {
        let data_dir = out_dir.join("data");
        mkdirs(&data_dir)?;
        let (tt, te, st, se) = &splits;
        for (name, ds) in [
            ("target_train", tt),
            ("target_test", te),
            ("shadow_train", st),
            ("shadow_test", se),
        ] {
            save_csv(ds, &data_dir.join(format!("{name}.csv")))?;
        }
        let stats = mia_core::data::compute_stats(tt)?;
        let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
        fs::write(data_dir.join("stats.json"), stats_json)
            .map_err(|e| io_runtime("writing stats", e))?;
        fs::write(out_dir.join("config.json"), config_json(config))
            .map_err(|e| io_runtime("writing config echo", e))?;
        Ok(())
    })?;
    for name in [
        "data/target_train.csv",
        "data/target_test.csv",
        "data/shadow_train.csv",
        "data/shadow_test.csv",
        "data/stats.json",
        "config.json",
    ] {
        manifest.add_artifact(name, name);
    }
    Ok(())
}

/// Fit the three attacks on the shadow-derived records. The fitting set must
/// be shadow-only; target records never reach this function.
pub fn fit_all_attacks(
    prep: &Preparation,
    config: &ExperimentConfig,
) -> CliResult<Vec<AttackModel>> {
    if let Some(r) = prep
        .attack_training
        .iter()
        .find(|r| !r.source_tag.starts_with("shadow"))
    {
        return Err(CliError::Runtime(format!(
            "attack-training record with non-shadow provenance `{}`",
            r.source_tag
        )));
    }
    let seed = stage_seed(config.master_seed, stage::ATTACK_FIT);
    Ok(vec![
        AttackModel::Entropy(fit_entropy_threshold(&prep.attack_training)?),
        AttackModel::MaxScore(fit_max_score_threshold(&prep.attack_training)?),
        AttackModel::Top3(fit_top3_with(&prep.attack_training, seed, &config.attack)?),
    ])
}

/// One evaluation dataset: records ready for [`evaluate_attack`].
struct EvalSet {
    tag: String,
    is_heldout: bool,
    records: Vec<MembershipRecord>,
    /// Labeled dataset behind the non-member records (for calibration).
    nonmembers: LabeledDataset,
}

/// Build the evaluation suite: one member subset shared by every dataset,
/// plus the configured non-member datasets, balanced to equal sizes.
fn build_eval_sets(
    prep: &Preparation,
    config: &ExperimentConfig,
) -> CliResult<Vec<EvalSet>> {
    let master = config.master_seed;
    let n_eval = config.eval_subset_size;
    let temp = config.temperature;
    let dim = config.data.feature_dim;

    let member_ds = prep
        .splits
        .target_train
        .subsample(n_eval, stage_seed(master, stage::EVAL_MEMBERS))?;
    let member_records =
        collect_records(&prep.target, &member_ds, true, temp, tags::TARGET_TRAIN)?;

    // one shared held-out subsample; the transform datasets derive from it
    let heldout = prep
        .splits
        .target_test
        .subsample(n_eval, stage_seed(master, stage::EVAL_DATASET_BASE))?;
    let (noise_lo, noise_hi) = feature_bounds(&prep.splits.target_train)?;

    let mut used_tags: Vec<String> = Vec::new();
    let mut sets = Vec::with_capacity(config.eval_datasets.len());
    for (i, spec) in config.eval_datasets.iter().enumerate() {
        let seed_i = stage_seed(master, stage::EVAL_DATASET_BASE + 1 + i as u64);
        let nonmembers = match spec {
            EvalDatasetSpec::Heldout => heldout.clone(),
            EvalDatasetSpec::Fake { n } => {
                make_fake(&prep.splits.target_train, n.unwrap_or(n_eval), seed_i)?
            }
            EvalDatasetSpec::Shifted { offset } => {
                make_shifted(&heldout, &vec![*offset; dim])?
            }
            EvalDatasetSpec::Noise { low, high } => make_uniform_noise(
                &heldout,
                low.unwrap_or(noise_lo),
                high.unwrap_or(noise_hi),
                seed_i,
            )?,
            EvalDatasetSpec::Permuted => make_permuted(&heldout, seed_i),
            EvalDatasetSpec::Scaled { delta } => make_scaled(&heldout, *delta)?,
        };
        let mut tag = spec.tag().to_string();
        let mut suffix = 2;
        while used_tags.contains(&tag) {
            tag = format!("{}_{suffix}", spec.tag());
            suffix += 1;
        }
        used_tags.push(tag.clone());

        let nonmember_records = collect_records(&prep.target, &nonmembers, false, temp, &tag)?;
        let mut records = member_records.clone();
        records.extend(nonmember_records);
        // Table-1 constraint: member and non-member subsets equal-sized
        let records = if nonmembers.len() == member_records.len() {
            records
        } else {
            balance(&records, seed_i)?
        };
        sets.push(EvalSet {
            tag,
            is_heldout: matches!(spec, EvalDatasetSpec::Heldout),
            records,
            nonmembers,
        });
    }
    Ok(sets)
}

/// `run`: full pipeline (prepare, fit attacks, evaluate, report files).
pub fn execute_run(
    base_config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    out_dir: &Path,
) -> CliResult<RunOutput> {
    mkdirs(out_dir)?;
    let config = scenario.apply(base_config)?;
    let mut manifest = RunManifest::new(
        "run",
        scenario.name(),
        config.master_seed,
        config_sha256(&config),
    );
    let result = run_stages(&config, scenario, out_dir, &mut manifest);
    manifest.write(out_dir)?;
    result
}

fn run_stages(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> CliResult<RunOutput> {
    let prep = manifest.stage("prepare", |_m| Ok(run_preparation(config)?))?;

    manifest.stage("persist_inputs", |m| {
        let data_dir = out_dir.join("data");
        let model_dir = out_dir.join("models");
        mkdirs(&data_dir)?;
        mkdirs(&model_dir)?;
        for (name, ds) in [
            ("target_train", &prep.raw_splits.target_train),
            ("target_test", &prep.raw_splits.target_test),
            ("shadow_train", &prep.raw_splits.shadow_train),
            ("shadow_test", &prep.raw_splits.shadow_test),
        ] {
            save_csv(ds, &data_dir.join(format!("{name}.csv")))?;
            m.add_artifact(
                &format!("data/{name}.csv"),
                &format!("data/{name}.csv"),
            );
        }
        let stats_json = serde_json::to_string_pretty(&prep.stats).expect("stats serialize");
        fs::write(data_dir.join("stats.json"), stats_json)
            .map_err(|e| io_runtime("writing stats", e))?;
        fs::write(out_dir.join("config.json"), config_json(config))
            .map_err(|e| io_runtime("writing config echo", e))?;
        save_network(&prep.target, &model_dir.join("target.bin"))?;
        save_network(&prep.shadow, &model_dir.join("shadow.bin"))?;
        for name in ["data/stats.json", "config.json", "models/target.bin", "models/shadow.bin"] {
            m.add_artifact(name, name);
        }
        Ok(())
    })?;

    let attacks = manifest.stage("fit_attacks", |m| {
        let attacks = fit_all_attacks(&prep, config)?;
        let attack_dir = out_dir.join("attacks");
        let record_dir = out_dir.join("records");
        mkdirs(&attack_dir)?;
        mkdirs(&record_dir)?;
        save_records(
            &prep.attack_training,
            &record_dir.join("attack_training.csv"),
        )?;
        m.add_artifact("records/attack_training.csv", "records/attack_training.csv");
        for attack in &attacks {
            let rel = format!("attacks/{}.bin", attack.name());
            save_attack(attack, &out_dir.join(&rel))?;
            m.add_artifact(&rel, &rel);
        }
        Ok(attacks)
    })?;

    let (reports, calibration) = manifest.stage("evaluate", |m| {
        let sets = build_eval_sets(&prep, config)?;
        let mut reports = Vec::with_capacity(sets.len() * attacks.len());
        let mut calibration = None;
        for set in &sets {
            let rel = format!("records/eval_{}.csv", set.tag);
            save_records(&set.records, &out_dir.join(&rel))?;
            m.add_artifact(&rel, &rel);
            let heldout_calibration = if set.is_heldout {
                let scores = predict_scores(
                    &prep.target,
                    &set.nonmembers.features,
                    config.temperature,
                )?;
                let labels = &set.nonmembers.labels;
                let e = ece(&scores, labels, DEFAULT_CALIBRATION_BINS)?;
                let o = oe(&scores, labels, DEFAULT_CALIBRATION_BINS)?;
                let e_max =
                    ece_with_key(&scores, labels, DEFAULT_CALIBRATION_BINS, BinningKey::MaxScore)?;
                let o_max =
                    oe_with_key(&scores, labels, DEFAULT_CALIBRATION_BINS, BinningKey::MaxScore)?;
                calibration = Some((e, o, e_max, o_max));
                Some((e, o))
            } else {
                None
            };
            for attack in &attacks {
                let mut report = evaluate_attack(attack, &set.records)?;
                if let Some((e, o)) = heldout_calibration {
                    report = report.with_calibration(e, o);
                }
                reports.push(report);
            }
        }
        let calibration = calibration.ok_or_else(|| {
            CliError::Runtime("evaluation suite has no heldout dataset".into())
        })?;
        Ok((reports, calibration))
    })?;
    let (ece_heldout, oe_heldout, ece_max_heldout, oe_max_heldout) = calibration;

    let output = manifest.stage("write_reports", |m| {
        let report_dir = out_dir.join("reports");
        mkdirs(&report_dir)?;
        let reports_json =
            serde_json::to_string_pretty(&reports).expect("reports serialize");
        fs::write(report_dir.join("reports.json"), reports_json)
            .map_err(|e| io_runtime("writing reports", e))?;

        let mut summary = String::from("scenario,dataset,attack,precision,recall,fpr,auroc\n");
        let mut extended = String::from("scenario,dataset,attack,auprc,fpr_at_95tpr\n");
        for r in &reports {
            summary.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                scenario.name(),
                r.dataset,
                r.attack,
                r.precision,
                r.recall,
                r.fpr,
                r.auroc
            ));
            extended.push_str(&format!(
                "{},{},{},{},{}\n",
                scenario.name(),
                r.dataset,
                r.attack,
                r.auprc,
                r.fpr_at_95tpr
            ));
        }
        fs::write(report_dir.join("summary.csv"), summary)
            .map_err(|e| io_runtime("writing summary", e))?;
        fs::write(report_dir.join("extended.csv"), extended)
            .map_err(|e| io_runtime("writing extended summary", e))?;

        let output = RunOutput {
            scenario: scenario.name().to_string(),
            out_dir: out_dir.to_path_buf(),
            reports: reports.clone(),
            target_train_accuracy: accuracy(&prep.target, &prep.splits.target_train)?,
            target_test_accuracy: accuracy(&prep.target, &prep.splits.target_test)?,
            shadow_train_accuracy: accuracy(&prep.shadow, &prep.splits.shadow_train)?,
            shadow_test_accuracy: accuracy(&prep.shadow, &prep.splits.shadow_test)?,
            ece_heldout,
            oe_heldout,
            ece_max_heldout,
            oe_max_heldout,
        };
        let run_summary = serde_json::json!({
            "scenario": output.scenario,
            "master_seed": config.master_seed,
            "target_train_accuracy": output.target_train_accuracy,
            "target_test_accuracy": output.target_test_accuracy,
            "shadow_train_accuracy": output.shadow_train_accuracy,
            "shadow_test_accuracy": output.shadow_test_accuracy,
            "ece_heldout": output.ece_heldout,
            "oe_heldout": output.oe_heldout,
            "ece_max_heldout": output.ece_max_heldout,
            "oe_max_heldout": output.oe_max_heldout,
        });
        fs::write(
            report_dir.join("run_summary.json"),
            serde_json::to_string_pretty(&run_summary).expect("summary serializes"),
        )
        .map_err(|e| io_runtime("writing run summary", e))?;
        for name in [
            "reports/reports.json",
            "reports/summary.csv",
            "reports/extended.csv",
            "reports/run_summary.json",
        ] {
            m.add_artifact(name, name);
        }
        Ok(output)
    })?;

    Ok(output)
}

/// Human-readable summary table, Table-1 style.
pub fn render_summary(output: &RunOutput) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario={} target train/test acc {:.4}/{:.4} shadow {:.4}/{:.4} ece {:.4} oe {:.4}\n",
        output.scenario,
        output.target_train_accuracy,
        output.target_test_accuracy,
        output.shadow_train_accuracy,
        output.shadow_test_accuracy,
        output.ece_heldout,
        output.oe_heldout,
    ));
    out.push_str(&format!(
        "{:<12} {:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>11}\n",
        "dataset", "attack", "precision", "recall", "fpr", "auroc", "auprc", "fpr@95tpr"
    ));
    for r in &output.reports {
        out.push_str(&format!(
            "{:<12} {:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>11.4}\n",
            r.dataset, r.attack, r.precision, r.recall, r.fpr, r.auroc, r.auprc, r.fpr_at_95tpr
        ));
    }
    out
}
