//! The `scaling-sweep` command.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mia_core::attacks::{load_attack, save_attack, scaling_sweep, AttackModel, SweepRow};
use mia_core::data::{generate_mixture, normalize, NormStats};
use mia_core::nn::{load_network, save_network};
use mia_core::shadow::{run_preparation, stage, stage_seed, ExperimentConfig};

use crate::config::config_sha256;
use crate::manifest::RunManifest;
use crate::run::fit_all_attacks;
use crate::scenario::ScenarioSpec;
use crate::{io_runtime, CliError, CliResult};

const ATTACK_NAMES: [&str; 3] = ["entropy", "max_score", "top3"];

/// Reuse the trained model and fitted attacks in `out_dir` when they exist
/// and were produced from the same config; otherwise build and persist them.
fn obtain_model_and_attacks(
    config: &ExperimentConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> CliResult<(mia_core::nn::Network, Vec<AttackModel>, NormStats)> {
    let target_path = out_dir.join("models/target.bin");
    let stats_path = out_dir.join("data/stats.json");
    let attacks_present = ATTACK_NAMES
        .iter()
        .all(|n| out_dir.join(format!("attacks/{n}.bin")).exists());
    let reusable = target_path.exists()
        && stats_path.exists()
        && attacks_present
        && RunManifest::load(out_dir)
            .map(|m| m.config_sha256 == config_sha256(config))
            .unwrap_or(false);

    if reusable {
        manifest.stage("load_artifacts", |_m| {
            let target = load_network(&target_path)?;
            let attacks = ATTACK_NAMES
                .iter()
                .map(|n| load_attack(&out_dir.join(format!("attacks/{n}.bin"))))
                .collect::<mia_core::Result<Vec<_>>>()?;
            let stats_text = fs::read_to_string(&stats_path)
                .map_err(|e| io_runtime("reading stats", e))?;
            let stats: NormStats = serde_json::from_str(&stats_text)
                .map_err(|e| CliError::Runtime(format!("malformed stats.json: {e}")))?;
            Ok((target, attacks, stats))
        })
    } else {
        let prep = manifest.stage("prepare", |_m| Ok(run_preparation(config)?))?;
        let attacks = manifest.stage("fit_attacks", |_m| fit_all_attacks(&prep, config))?;
        manifest.stage("persist_models", |m| {
            fs::create_dir_all(out_dir.join("models"))
                .map_err(|e| io_runtime("creating models dir", e))?;
            fs::create_dir_all(out_dir.join("attacks"))
                .map_err(|e| io_runtime("creating attacks dir", e))?;
            fs::create_dir_all(out_dir.join("data"))
                .map_err(|e| io_runtime("creating data dir", e))?;
            save_network(&prep.target, &out_dir.join("models/target.bin"))?;
            save_network(&prep.shadow, &out_dir.join("models/shadow.bin"))?;
            for attack in &attacks {
                save_attack(attack, &out_dir.join(format!("attacks/{}.bin", attack.name())))?;
            }
            let stats_json =
                serde_json::to_string_pretty(&prep.stats).expect("stats serialize");
            fs::write(out_dir.join("data/stats.json"), stats_json)
                .map_err(|e| io_runtime("writing stats", e))?;
            for name in ["models/target.bin", "models/shadow.bin", "data/stats.json"] {
                m.add_artifact(name, name);
            }
            for attack in &attacks {
                let rel = format!("attacks/{}.bin", attack.name());
                m.add_artifact(&rel, &rel);
            }
            Ok(())
        })?;
        Ok((prep.target, attacks, prep.stats))
    }
}

/// `scaling-sweep`: scale a fresh non-member set by each configured delta
/// and tabulate mean max score plus the member-classified fraction per attack.
pub fn execute_sweep(
    base_config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    out_dir: &Path,
) -> CliResult<Vec<SweepRow>> {
    fs::create_dir_all(out_dir).map_err(|e| io_runtime("creating output directory", e))?;
    let config = scenario.apply(base_config)?;
    let mut manifest = RunManifest::new(
        "scaling-sweep",
        scenario.name(),
        config.master_seed,
        config_sha256(&config),
    );
    let result = sweep_stages(&config, out_dir, &mut manifest);
    manifest.write(out_dir)?;
    result
}

fn sweep_stages(
    config: &ExperimentConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> CliResult<Vec<SweepRow>> {
    let (target, attacks, stats) = obtain_model_and_attacks(config, out_dir, manifest)?;

    let rows = manifest.stage("sweep", |_m| {
        let spec = config.data.mixture_spec()?;
        let fresh = generate_mixture(
            &spec,
            config.sweep.n_samples,
            stage_seed(config.master_seed, stage::SWEEP_DATA),
        )?;
        let nonmembers = normalize(&fresh, &stats)?;
        Ok(scaling_sweep(
            &target,
            &attacks,
            &nonmembers,
            &config.sweep.deltas,
            config.temperature,
        )?)
    })?;

    manifest.stage("write_table", |m| {
        fs::write(out_dir.join("sweep.csv"), render_sweep_csv(&rows))
            .map_err(|e| io_runtime("writing sweep.csv", e))?;
        m.add_artifact("sweep.csv", "sweep.csv");
        Ok(())
    })?;
    Ok(rows)
}

/// CSV with one row per delta; the `max_score` attack column is shortened
/// to `frac_member_max`.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta,mean_max_score");
    if let Some(first) = rows.first() {
        for (name, _) in &first.member_fractions {
            let short = if name == "max_score" { "max" } else { name };
            let _ = write!(out, ",frac_member_{short}");
        }
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", row.delta, row.mean_max_score);
        for (_, frac) in &row.member_fractions {
            let _ = write!(out, ",{frac}");
        }
        out.push('\n');
    }
    out
}
