//! Integration tests for the `mia-audit` binary: exit codes, artifact
//! layout, and determinism of the command-line surface.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mia-audit"))
        .args(args)
        .output()
        .expect("spawn mia-audit")
}

fn fast_config(dir: &Path) -> String {
    // default config with a shorter training run; everything else inherited
    let mut config: serde_json::Value = serde_json::to_value(
        mia_core::shadow::ExperimentConfig::default_desk_scale(),
    )
    .unwrap();
    config["training"]["epochs"] = 25.into();
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(mia(&["--help"]).status.code(), Some(0));
    assert_eq!(mia(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(mia(&["run"]).status.code(), Some(1), "missing --out is a usage error");
    let out = mia(&["run", "--out", "/tmp/x", "--scenario", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));
}

#[test]
fn corrupted_config_key_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        "{\n  \"master_seed\": 1,\n  \"not_a_real_key\": true\n}\n",
    )
    .unwrap();
    let out = mia(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not_a_real_key"), "stderr: {stderr}");
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn generate_data_is_deterministic_and_creates_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path());
    let out_a = dir.path().join("deep/nested/a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = mia(&[
            "generate-data",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in [
        "target_train.csv",
        "target_test.csv",
        "shadow_train.csv",
        "shadow_test.csv",
    ] {
        let a = fs::read(out_a.join("data").join(name)).unwrap();
        let b = fs::read(out_b.join("data").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    assert!(out_a.join("data/stats.json").exists());
    assert!(out_a.join("manifest.json").exists());
}

#[test]
fn run_produces_expected_artifacts_and_summary_shape() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path());
    let out = dir.path().join("run");
    let res = mia(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    for artifact in [
        "manifest.json",
        "config.json",
        "data/stats.json",
        "models/target.bin",
        "models/shadow.bin",
        "attacks/entropy.bin",
        "attacks/max_score.bin",
        "attacks/top3.bin",
        "records/attack_training.csv",
        "reports/reports.json",
        "reports/summary.csv",
        "reports/extended.csv",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    // 3 attacks x 6 default datasets
    let summary = fs::read_to_string(out.join("reports/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 6, "summary:\n{summary}");
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports/reports.json")).unwrap())
            .unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 18);

    // every artifact referenced by the manifest exists
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["failed_stage"].is_null());
    for (_, rel) in manifest["artifacts"].as_object().unwrap() {
        assert!(out.join(rel.as_str().unwrap()).exists());
    }
}

#[test]
fn scaling_sweep_reuses_run_artifacts_and_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path());
    let out = dir.path().join("sweep");
    let res = mia(&[
        "scaling-sweep",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delta,mean_max_score,frac_member_entropy,frac_member_max,frac_member_top3"
    );
    assert_eq!(lines.count(), 7, "one row per default delta");

    // rerunning against the same directory reuses the persisted model
    let again = mia(&[
        "scaling-sweep",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(again.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert!(stages.contains(&"load_artifacts"), "stages: {stages:?}");
}

#[test]
fn sweep_fractions_nondecreasing_endpoints_for_threshold_attacks() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path());
    for seed in ["11", "12"] {
        let out = dir.path().join(format!("sweep{seed}"));
        let res = mia(&[
            "scaling-sweep",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(res.status.code(), Some(0));
        let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
        let rows: Vec<Vec<f64>> = table
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        let first = &rows[0];
        let last = rows.last().unwrap();
        // columns: delta, mean_max, entropy, max, top3
        for col in [2, 3] {
            assert!(
                last[col] >= first[col],
                "seed {seed}: column {col} decreased from {} to {}",
                first[col],
                last[col]
            );
        }
        assert!(last[1] >= 0.999, "seed {seed}: final mean max {}", last[1]);
    }
}

#[test]
fn report_consolidates_and_flags_malformed_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path());
    let std_dir = dir.path().join("std");
    let ls_dir = dir.path().join("ls");
    for (out, scenario) in [(&std_dir, "standard"), (&ls_dir, "label-smoothing")] {
        let res = mia(&[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--scenario",
            scenario,
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }

    // single run: no delta columns
    let rep_single = dir.path().join("rep1");
    let res = mia(&[
        "report",
        std_dir.to_str().unwrap(),
        "--out",
        rep_single.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let single = fs::read_to_string(rep_single.join("comparison.csv")).unwrap();
    assert!(!single.lines().next().unwrap().contains("delta_auroc"));

    // two runs: delta columns against the standard baseline, plus KDE/EMD data
    let rep_both = dir.path().join("rep2");
    let res = mia(&[
        "report",
        std_dir.to_str().unwrap(),
        ls_dir.to_str().unwrap(),
        "--out",
        rep_both.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let both = fs::read_to_string(rep_both.join("comparison.csv")).unwrap();
    assert!(both.lines().next().unwrap().contains("delta_auroc"));
    assert!(rep_both.join("emd.csv").exists());
    assert!(rep_both.join("kde/standard__member.csv").exists());
    assert!(rep_both.join("kde/label_smoothing__heldout.csv").exists());
    let kde = fs::read_to_string(rep_both.join("kde/standard__heldout.csv")).unwrap();
    assert_eq!(kde.lines().next().unwrap(), "grid,density");

    // malformed run directory: runtime failure listing what is missing
    let broken = dir.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    let res = mia(&[
        "report",
        broken.to_str().unwrap(),
        "--out",
        dir.path().join("rep3").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("missing artifacts"), "stderr: {stderr}");
}

#[test]
fn temperature_scenario_lowers_entropy_auroc_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_std = dir.path().join("std");
    let out_temp = dir.path().join("temp");
    for (out, scenario) in [(&out_std, "standard"), (&out_temp, "temperature")] {
        let res = mia(&[
            "run",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42",
            "--scenario",
            scenario,
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let auroc = |dir: &Path| -> f64 {
        let reports: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.join("reports/reports.json")).unwrap(),
        )
        .unwrap();
        reports
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["dataset"] == "heldout" && r["attack"] == "entropy")
            .unwrap()["auroc"]
            .as_f64()
            .unwrap()
    };
    assert!(auroc(&out_temp) < auroc(&out_std));
}
