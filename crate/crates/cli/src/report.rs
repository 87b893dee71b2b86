//! The `report` command: cross-scenario comparison plus KDE/EMD plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mia_core::metrics::{emd_1d, kde_gaussian, linear_grid, scott_bandwidth, EvalReport};
use mia_core::shadow::load_records;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{io_runtime, CliError, CliResult};

/// One loaded run directory.
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub reports: Vec<EvalReport>,
    /// Max scores of the shared member subset.
    pub member_maxes: Vec<f64>,
    /// Dataset tag to non-member max scores.
    pub nonmember_maxes: BTreeMap<String, Vec<f64>>,
}

fn required_artifacts(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join(MANIFEST_FILE), dir.join("reports/reports.json")]
}

pub fn load_run(dir: &Path) -> CliResult<LoadedRun> {
    let missing: Vec<String> = required_artifacts(dir)
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Runtime(format!(
            "run directory {} is missing artifacts: {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    let manifest = RunManifest::load(dir)?;
    let reports_text = fs::read_to_string(dir.join("reports/reports.json"))
        .map_err(|e| io_runtime("reading reports.json", e))?;
    let reports: Vec<EvalReport> = serde_json::from_str(&reports_text)
        .map_err(|e| CliError::Runtime(format!("malformed reports.json: {e}")))?;

    let records_dir = dir.join("records");
    let mut eval_files: Vec<PathBuf> = fs::read_dir(&records_dir)
        .map_err(|e| {
            CliError::Runtime(format!(
                "run directory {} is missing artifacts: {} ({e})",
                dir.display(),
                records_dir.display()
            ))
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("eval_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    eval_files.sort();
    if eval_files.is_empty() {
        return Err(CliError::Runtime(format!(
            "run directory {} is missing artifacts: records/eval_*.csv",
            dir.display()
        )));
    }

    let mut member_maxes = Vec::new();
    let mut nonmember_maxes = BTreeMap::new();
    for path in &eval_files {
        let records = load_records(path)?;
        let tag = path
            .file_stem()
            .and_then(|n| n.to_str())
            .unwrap_or("eval")
            .trim_start_matches("eval_")
            .to_string();
        if member_maxes.is_empty() {
            member_maxes = records
                .iter()
                .filter(|r| r.is_member)
                .map(|r| r.scores.max_score())
                .collect();
        }
        nonmember_maxes.insert(
            tag,
            records
                .iter()
                .filter(|r| !r.is_member)
                .map(|r| r.scores.max_score())
                .collect(),
        );
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest,
        reports,
        member_maxes,
        nonmember_maxes,
    })
}

/// `report`: consolidated comparison table plus KDE/EMD plot data.
/// Returns the comparison CSV text.
pub fn execute_report(run_dirs: &[PathBuf], out_dir: &Path) -> CliResult<String> {
    if run_dirs.is_empty() {
        return Err(CliError::Usage("report needs at least one run directory".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_runtime("creating output directory", e))?;
    let runs: Vec<LoadedRun> = run_dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<CliResult<_>>()?;

    // baseline for delta columns: the first run with the standard scenario
    let baseline = runs.iter().find(|r| r.manifest.scenario == "standard");
    let baseline_metric = |dataset: &str, attack: &str| -> Option<&EvalReport> {
        baseline.and_then(|b| {
            b.reports
                .iter()
                .find(|r| r.dataset == dataset && r.attack == attack)
        })
    };
    let with_delta = baseline.is_some() && runs.len() > 1;

    let mut comparison = String::from(
        "scenario,dataset,attack,precision,recall,fpr,auroc,auprc,fpr_at_95tpr,ece,oe,emd_vs_members",
    );
    if with_delta {
        comparison.push_str(",delta_auroc,delta_fpr");
    }
    comparison.push('\n');
    for run in &runs {
        for r in &run.reports {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = write!(
                comparison,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                run.manifest.scenario,
                r.dataset,
                r.attack,
                r.precision,
                r.recall,
                r.fpr,
                r.auroc,
                r.auprc,
                r.fpr_at_95tpr,
                opt(r.ece),
                opt(r.oe),
                r.emd_vs_members,
            );
            if with_delta {
                match baseline_metric(&r.dataset, &r.attack) {
                    Some(base) if run.manifest.scenario != "standard" => {
                        let _ = write!(
                            comparison,
                            ",{},{}",
                            r.auroc - base.auroc,
                            r.fpr - base.fpr
                        );
                    }
                    _ => comparison.push_str(",,"),
                }
            }
            comparison.push('\n');
        }
    }
    fs::write(out_dir.join("comparison.csv"), &comparison)
        .map_err(|e| io_runtime("writing comparison.csv", e))?;

    // KDE plot data (two-column CSV per curve) and EMD table
    let kde_dir = out_dir.join("kde");
    fs::create_dir_all(&kde_dir).map_err(|e| io_runtime("creating kde dir", e))?;
    let mut emd_table = String::from("scenario,dataset,emd_vs_members\n");
    for run in &runs {
        let scenario = &run.manifest.scenario;
        write_kde_curve(&kde_dir.join(format!("{scenario}__member.csv")), &run.member_maxes)?;
        for (tag, maxes) in &run.nonmember_maxes {
            write_kde_curve(&kde_dir.join(format!("{scenario}__{tag}.csv")), maxes)?;
            let emd = emd_1d(&run.member_maxes, maxes)?;
            let _ = writeln!(emd_table, "{scenario},{tag},{emd}");
        }
    }
    fs::write(out_dir.join("emd.csv"), &emd_table)
        .map_err(|e| io_runtime("writing emd.csv", e))?;
    Ok(comparison)
}

fn write_kde_curve(path: &Path, samples: &[f64]) -> CliResult<()> {
    if samples.is_empty() {
        return Err(CliError::Runtime(format!(
            "no samples behind KDE curve {}",
            path.display()
        )));
    }
    let h = scott_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let grid = linear_grid(lo, hi, 513);
    let density = kde_gaussian(samples, &grid, h)?;
    let mut out = String::from("grid,density\n");
    for (g, d) in grid.iter().zip(&density) {
        let _ = writeln!(out, "{g},{d}");
    }
    fs::write(path, out).map_err(|e| io_runtime("writing kde curve", e))
}
