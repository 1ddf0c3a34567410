//! Single-cell runs: simulate all replicas, compute the report, persist.

use std::path::{Path, PathBuf};

use kslab::dynamics::{simulate, TrajectoryRecord};
use kslab::empirical_measure::TestFunctionFamily;
use kslab::initializers::sixth_moment;
use kslab::seeding::ReplicaSeed;
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::persist::{write_run, Metadata, ReplicaInfo, RunArtifacts};
use crate::report::{compute_report, DiagnosticsReport};
use crate::HarnessError;

pub struct RunOutcome {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub records: Vec<TrajectoryRecord>,
    pub replicas: Vec<ReplicaInfo>,
    pub report: DiagnosticsReport,
    pub metadata: Metadata,
}

/// Validates the config and inlines file atoms.
pub fn resolve(cfg: &RunConfig) -> Result<RunConfig, HarnessError> {
    cfg.validate()?;
    let mut out = cfg.clone();
    out.sim.law = cfg.sim.law.clone().resolve().map_err(|e| HarnessError::Validation(e.to_string()))?;
    out.sim.validate()?;
    Ok(out)
}

/// Simulates replica `i` of a resolved config.
pub fn simulate_replica(cfg: &RunConfig, i: usize) -> Result<(TrajectoryRecord, ReplicaInfo), HarnessError> {
    let seed = ReplicaSeed::derive(cfg.sim.master_seed, cfg.cell, i as u64);
    let rec = simulate(&cfg.sim, &cfg.sim.law, &seed, &mut [])
        .map_err(|e| match HarnessError::from(e) {
            HarnessError::Runtime(m) => HarnessError::Runtime(format!("replica {i}: {m}")),
            other => other,
        })?;
    let info = ReplicaInfo { replica: i, seed: seed.to_hex(), steps: rec.steps, blowup_time: rec.blowup_time, sixth_moment: sixth_moment(&rec.snapshots[0].positions) };
    Ok((rec, info))
}

/// All replicas, in index order. Replicas run in parallel; each is a pure
/// function of its seed so the result does not depend on scheduling.
pub fn simulate_replicas(cfg: &RunConfig) -> Result<(Vec<TrajectoryRecord>, Vec<ReplicaInfo>), HarnessError> {
    let out: Vec<_> = (0..cfg.sim.replicas).into_par_iter().map(|i| simulate_replica(cfg, i)).collect::<Result<_, _>>()?;
    Ok(out.into_iter().unzip())
}

/// Runs `cfg` into `dir`, replacing any previous run there.
pub fn execute_in(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome, HarnessError> {
    let cfg = resolve(cfg)?;
    if cfg.sim.theta == 2.0 && cfg.sim.law.is_full_dirac() {
        warn!("{}: single-atom initial law at theta = 2 violates the no-full-Dirac hypothesis", cfg.name);
    }
    info!("{}: theta = {}, n = {}, {} replicas", cfg.name, cfg.sim.theta, cfg.sim.n, cfg.sim.replicas);
    let (records, replicas) = simulate_replicas(&cfg)?;
    let (report, series) = compute_report(&cfg, &records)?;
    let family = TestFunctionFamily::default();
    let metadata = write_run(
        dir,
        &RunArtifacts {
            config: &cfg,
            records: &records,
            replicas: &replicas,
            report: &report,
            series: &series,
            family_hash: family.content_hash(),
            family_terms: family.len(),
        },
    )?;
    Ok(RunOutcome { dir: dir.to_path_buf(), config: cfg, records, replicas, report, metadata })
}

/// Runs `cfg` into its configured run directory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    execute_in(cfg, &cfg.run_dir())
}
