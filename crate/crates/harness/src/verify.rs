//! Integrity checks and acceptance criteria over a directory of runs.

use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, CriterionResult, Status};
use crate::persist::{checksum_mismatches, find_runs, load_run, write_json, LoadedRun};
use crate::report::{compute_report, DiagnosticsReport};
use crate::run::simulate_replica;
use crate::HarnessError;

pub const VERIFY_FILE: &str = "verification.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheck {
    pub dir: String,
    pub issues: Vec<String>,
    /// Replicas re-simulated from the echoed metadata and compared bitwise.
    pub replayed: Vec<usize>,
    pub replay_identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub root: String,
    pub runs: Vec<RunCheck>,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Also evaluate the criteria that need no runs.
    pub standalone: bool,
    /// Replicas re-simulated per run (first and last first).
    pub replay: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { standalone: true, replay: 2 }
    }
}

fn replay_indices(n: usize, count: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [0, n.saturating_sub(1)].into_iter().chain(1..n).take(count.min(n)).collect();
    v.sort();
    v.dedup();
    v
}

fn check_run(run: &LoadedRun, opts: &VerifyOptions) -> RunCheck {
    let mut issues = checksum_mismatches(&run.dir, &run.metadata);
    let cfg = &run.metadata.config;
    if run.records.len() != cfg.sim.replicas {
        issues.push(format!("{} replicas stored, config says {}", run.records.len(), cfg.sim.replicas));
    }
    match compute_report(cfg, &run.records) {
        Ok((report, _)) if report == run.report => {}
        Ok(_) => issues.push("report.json does not match the stored trajectories".into()),
        Err(e) => issues.push(format!("recomputing the report failed: {e}")),
    }
    let replayed = replay_indices(run.records.len(), opts.replay);
    let mut identical = true;
    for &i in &replayed {
        match simulate_replica(cfg, i) {
            Ok((rec, info)) if rec == run.records[i] && info == run.replicas[i] => {}
            Ok(_) => {
                identical = false;
                issues.push(format!("replica {i}: replay differs from the stored trajectory"));
            }
            Err(e) => {
                identical = false;
                issues.push(format!("replica {i}: replay failed: {e}"));
            }
        }
    }
    RunCheck { dir: run.dir.display().to_string(), issues, replayed, replay_identical: identical }
}

/// Every criterion, given the reports present and the replay evidence.
pub fn evaluate(reports: &[&DiagnosticsReport], replay: &[(String, bool)], standalone: bool) -> Vec<CriterionResult> {
    let skip = |id: u8, name: &str| CriterionResult {
        id,
        name: name.into(),
        status: Status::NotApplicable,
        detail: "standalone criteria not requested".into(),
    };
    vec![
        criteria::dispersion_drift(reports),
        criteria::critical_zero_drift(reports),
        criteria::quadratic_variation(reports),
        if standalone { criteria::dimension_combinatorics(10_000) } else { skip(4, "dimension combinatorics") },
        if standalone { criteria::barycentre_inequality(100_000, 5) } else { skip(5, "barycentre inequality") },
        criteria::moment_bound(reports),
        criteria::phase_classification(reports),
        criteria::explosion_divergence(reports),
        criteria::residual_scaling(reports),
        if standalone { criteria::bessel_dichotomy(500, 10) } else { skip(10, "Bessel oracle dichotomy") },
        criteria::centroid_conservation(reports),
        criteria::determinism(replay),
    ]
}

/// Verifies every run under `root` and writes `verification.json` there.
pub fn verify(root: &Path, opts: VerifyOptions) -> Result<VerifyReport, HarnessError> {
    let dirs = find_runs(root)?;
    if dirs.is_empty() {
        return Err(HarnessError::Runtime(format!("no run directories under {}", root.display())));
    }
    let mut runs = Vec::new();
    let mut checks = Vec::new();
    for d in &dirs {
        info!("verifying {}", d.display());
        match load_run(d) {
            Ok(run) => {
                checks.push(check_run(&run, &opts));
                runs.push(run);
            }
            Err(e) => checks.push(RunCheck { dir: d.display().to_string(), issues: vec![e.to_string()], replayed: vec![], replay_identical: false }),
        }
    }
    let reports: Vec<&DiagnosticsReport> = runs.iter().map(|r| &r.report).collect();
    let replay: Vec<(String, bool)> = checks.iter().filter(|c| !c.replayed.is_empty()).map(|c| (c.dir.clone(), c.replay_identical)).collect();
    let criteria = evaluate(&reports, &replay, opts.standalone);
    let passed = checks.iter().all(|c| c.issues.is_empty()) && criteria.iter().all(|c| c.status != Status::Fail);
    let report = VerifyReport { root: root.display().to_string(), runs: checks, criteria, passed };
    write_json(&root.join(VERIFY_FILE), &report)?;
    Ok(report)
}
