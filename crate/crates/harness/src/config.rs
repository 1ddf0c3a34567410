//! Run configuration files and `--set` overrides.

use std::path::{Path, PathBuf};

use kslab::config::SimConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, OUTPUT_ROOT_ENV};

fn default_name() -> String {
    "run".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One experiment cell: a simulation config, where to write it and which
/// diagnostics to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Cell index fed to the seed derivation.
    #[serde(default)]
    pub cell: u64,
    pub sim: SimConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSelection {
    /// Stopped drift of the global dispersion and of the empirical variance.
    pub drift: bool,
    pub quadratic_variation: bool,
    /// Exponents `gamma` for the all-pairs moment integral.
    pub pair_moments: Vec<f64>,
    /// Weak-formulation residual for a unit Gaussian bump at the origin.
    pub residual: bool,
    pub centroid: bool,
    pub g_functional: bool,
    pub g_triple_budget: usize,
    pub diffuseness: bool,
    pub collision_scale: f64,
    /// Exponent for the time modulus of the measure path.
    pub holder_exponent: Option<f64>,
}

impl Default for DiagnosticsSelection {
    fn default() -> Self {
        DiagnosticsSelection {
            drift: true,
            quadratic_variation: false,
            pair_moments: Vec::new(),
            residual: false,
            centroid: true,
            g_functional: false,
            g_triple_budget: 2000,
            diffuseness: false,
            collision_scale: 1e-3,
            holder_exponent: None,
        }
    }
}

impl RunConfig {
    pub fn new(name: impl Into<String>, sim: SimConfig) -> Self {
        RunConfig { name: name.into(), output_dir: default_output_dir(), cell: 0, sim, diagnostics: DiagnosticsSelection::default() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(HarnessError::Validation(format!("name {:?} is not a valid directory name", self.name)));
        }
        self.sim.validate()?;
        let d = &self.diagnostics;
        if let Some(g) = d.pair_moments.iter().find(|&&g| !(g > self.sim.theta && g < 2.0)) {
            return Err(HarnessError::Validation(format!("pair moment gamma = {g} must lie in (theta, 2) = ({}, 2)", self.sim.theta)));
        }
        if d.g_functional && d.g_triple_budget == 0 {
            return Err(HarnessError::Validation("g_triple_budget must be >= 1".into()));
        }
        if d.diffuseness && !(d.collision_scale > 0.0) {
            return Err(HarnessError::Validation("collision_scale must be > 0".into()));
        }
        if let Some(a) = d.holder_exponent {
            if !(a > 0.0 && a.is_finite()) {
                return Err(HarnessError::Validation(format!("holder_exponent must be > 0, got {a}")));
            }
        }
        Ok(())
    }

    /// `$KSLAB_OUTPUT_ROOT/<name>` when the variable is set, otherwise
    /// `<output_dir>/<name>`.
    pub fn run_dir(&self) -> PathBuf {
        output_root(&self.output_dir).join(&self.name)
    }
}

pub fn output_root(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` overrides, creating intermediate tables.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), HarnessError> {
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            return Err(HarnessError::Validation(format!("override {o:?} is not of the form key=value")));
        };
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(HarnessError::Validation(format!("bad override key {key:?}")));
        }
        let mut cur = &mut *table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = match entry {
                toml::Value::Table(t) => t,
                _ => return Err(HarnessError::Validation(format!("override {key:?}: {p:?} is not a table"))),
            };
        }
        cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

pub fn read_table(path: &Path) -> Result<toml::Table, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    toml::from_str(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))
}

pub fn from_table<T: DeserializeOwned>(table: toml::Table, what: &str) -> Result<T, HarnessError> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| HarnessError::Validation(format!("{what}: {e}")))
}

/// Reads a run config, applies overrides and validates it.
pub fn load_run_config(path: &Path, overrides: &[String]) -> Result<RunConfig, HarnessError> {
    let mut table = read_table(path)?;
    apply_overrides(&mut table, overrides)?;
    let cfg: RunConfig = from_table(table, &path.display().to_string())?;
    cfg.validate()?;
    Ok(cfg)
}
