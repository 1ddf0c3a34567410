//! Sweeps over `(theta, N)` grids with cross-cell aggregates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kslab::config::SimConfig;
use kslab::diagnostics::{explosion_time_summary, ExplosionGroup, ExplosionSummary, MIN_EXPLOSION_REPLICAS};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{apply_overrides, from_table, output_root, read_table, DiagnosticsSelection, RunConfig};
use crate::persist::{fmt_f64, fmt_opt, write_json, write_table};
use crate::report::{DiagnosticsReport, MomentRow};
use crate::run::execute_in;
use crate::HarnessError;

pub const SWEEP_FILE: &str = "sweep.json";

fn default_name() -> String {
    "sweep".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub thetas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Adds or replaces the `k = 3` detector in every cell with `ell = N`.
    #[serde(default)]
    pub ell_equals_n: bool,
    /// Simulation settings shared by all cells, without `theta` and `n`.
    pub template: toml::Table,
    #[serde(default)]
    pub diagnostics: DiagnosticsSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: u64,
    pub name: String,
    pub theta: f64,
    pub n: usize,
    pub dir: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionAggregate {
    pub theta: f64,
    pub summary: ExplosionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAggregate {
    pub theta: f64,
    pub gamma: f64,
    /// `(N, moment row)` in increasing `N`.
    pub rows: Vec<(usize, MomentRow)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub spec: SweepSpec,
    pub cells: Vec<CellSummary>,
    /// Set when at least one cell failed; aggregates cover the rest.
    pub partial: bool,
    pub explosion: Vec<ExplosionAggregate>,
    pub moments: Vec<MomentAggregate>,
    pub warnings: Vec<String>,
}

pub fn load_sweep_spec(path: &Path, overrides: &[String]) -> Result<SweepSpec, HarnessError> {
    let mut table = read_table(path)?;
    apply_overrides(&mut table, overrides)?;
    let spec: SweepSpec = from_table(table, &path.display().to_string())?;
    spec.validate()?;
    Ok(spec)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.thetas.is_empty() || self.ns.is_empty() {
            return Err(HarnessError::Validation("sweep grids over theta and n must be nonempty".into()));
        }
        for key in ["theta", "n"] {
            if self.template.contains_key(key) {
                return Err(HarnessError::Validation(format!("template must not set {key}; it comes from the grid")));
            }
        }
        Ok(())
    }

    pub fn sweep_dir(&self) -> PathBuf {
        output_root(&self.output_dir).join(&self.name)
    }

    /// Cell configs in grid order, theta-major. Errors are per cell.
    pub fn cells(&self) -> Vec<(u64, String, f64, usize, Result<RunConfig, HarnessError>)> {
        let mut out = Vec::new();
        let mut c = 0;
        for &theta in &self.thetas {
            for &n in &self.ns {
                let name = format!("theta{theta}_n{n}");
                let cfg = self.cell_config(c, &name, theta, n);
                out.push((c, name, theta, n, cfg));
                c += 1;
            }
        }
        out
    }

    fn cell_config(&self, cell: u64, name: &str, theta: f64, n: usize) -> Result<RunConfig, HarnessError> {
        let mut t = self.template.clone();
        t.insert("theta".into(), toml::Value::Float(theta));
        t.insert("n".into(), toml::Value::Integer(n as i64));
        let mut sim: SimConfig = from_table(t, &format!("cell {name}"))?;
        if self.ell_equals_n {
            sim.detectors.retain(|d| d.k != 3);
            sim = sim.with_detector(3, n as f64);
        }
        let cfg = RunConfig { name: name.into(), output_dir: self.sweep_dir().join("cells"), cell, sim, diagnostics: self.diagnostics.clone() };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn aggregate(spec: &SweepSpec, done: &[DiagnosticsReport], warnings: &mut Vec<String>) -> (Vec<ExplosionAggregate>, Vec<MomentAggregate>) {
    let mut by_theta: BTreeMap<u64, Vec<&DiagnosticsReport>> = BTreeMap::new();
    for r in done {
        by_theta.entry(r.theta.to_bits()).or_default().push(r);
    }
    let mut explosion = Vec::new();
    let mut moments = Vec::new();
    for (t, mut reports) in by_theta {
        let theta = f64::from_bits(t);
        reports.sort_by_key(|r| r.n);
        let groups: Vec<ExplosionGroup> = reports
            .iter()
            .filter_map(|r| {
                let d = r.detectors.iter().filter(|d| d.k == 3).max_by(|a, b| a.ell.total_cmp(&b.ell))?;
                Some(ExplosionGroup { n: r.n, ell: d.ell, times: d.times.clone() })
            })
            .filter(|g| g.times.len() >= MIN_EXPLOSION_REPLICAS)
            .collect();
        if !groups.is_empty() {
            let violating = reports.iter().any(|r| r.hypothesis_violating);
            match explosion_time_summary(&groups, violating) {
                Ok(summary) => explosion.push(ExplosionAggregate { theta, summary }),
                Err(e) => warnings.push(format!("theta = {theta}: explosion summary: {e}")),
            }
        }
        for &gamma in &spec.diagnostics.pair_moments {
            let rows: Vec<(usize, MomentRow)> =
                reports.iter().filter_map(|r| r.pair_moments.iter().find(|m| m.gamma == gamma).map(|m| (r.n, *m))).collect();
            if !rows.is_empty() {
                moments.push(MomentAggregate { theta, gamma, rows });
            }
        }
    }
    (explosion, moments)
}

fn write_aggregates(dir: &Path, s: &SweepSummary) -> Result<(), HarnessError> {
    for e in &s.explosion {
        let rows: Vec<Vec<String>> = e
            .summary
            .rows
            .iter()
            .map(|r| {
                let p = e.summary.tests.iter().find(|t| t.n_hi == r.n).map(|t| t.p_value);
                vec![
                    r.n.to_string(),
                    fmt_f64(r.ell),
                    r.replicas.to_string(),
                    r.fired.to_string(),
                    fmt_f64(r.median),
                    fmt_f64(r.q25),
                    fmt_f64(r.q75),
                    fmt_opt(p),
                ]
            })
            .collect();
        let header = ["n", "ell", "replicas", "fired", "median", "q25", "q75", "p_vs_previous"];
        write_table(&dir.join(format!("aggregates/explosion_theta{}.csv", e.theta)), &header, &rows)?;
    }
    for m in &s.moments {
        let rows: Vec<Vec<String>> = m
            .rows
            .iter()
            .map(|(n, r)| {
                vec![
                    n.to_string(),
                    fmt_f64(r.at_horizon.value),
                    fmt_f64(r.at_horizon.stderr),
                    fmt_f64(r.at_half_horizon.value),
                    fmt_f64(r.at_horizon.value / r.at_half_horizon.value),
                ]
            })
            .collect();
        let header = ["n", "value", "stderr", "value_half_horizon", "growth"];
        write_table(&dir.join(format!("aggregates/moments_theta{}_gamma{}.csv", m.theta, m.gamma)), &header, &rows)?;
    }
    Ok(())
}

/// Runs every cell, then aggregates over the cells that completed.
/// Fails only when no cell completed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary, HarnessError> {
    spec.validate()?;
    let dir = spec.sweep_dir();
    let mut cells = Vec::new();
    let mut done = Vec::new();
    let mut warnings = Vec::new();
    for (cell, name, theta, n, cfg) in spec.cells() {
        let cell_dir = dir.join("cells").join(&name);
        let result = cfg.and_then(|cfg| execute_in(&cfg, &cell_dir));
        let error = match result {
            Ok(out) => {
                info!("cell {name}: done");
                done.push(out.report);
                None
            }
            Err(e) => {
                warn!("cell {name} failed: {e}");
                warnings.push(format!("cell {name} failed; aggregates exclude it"));
                Some(e.to_string())
            }
        };
        cells.push(CellSummary { cell, name, theta, n, dir: cell_dir.display().to_string(), error });
    }
    let partial = cells.iter().any(|c| c.error.is_some());
    let (explosion, moments) = aggregate(spec, &done, &mut warnings);
    let summary = SweepSummary { spec: spec.clone(), cells, partial, explosion, moments, warnings };
    write_json(&dir.join(SWEEP_FILE), &summary)?;
    write_aggregates(&dir, &summary)?;
    if done.is_empty() {
        return Err(HarnessError::Runtime(format!("all {} cells failed", summary.cells.len())));
    }
    Ok(summary)
}
