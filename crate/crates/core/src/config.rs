//! Simulation configuration and its validation rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::initializers::{InitError, InitialLaw, MIN_PARTICLES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("theta must be positive and finite, got {0}")]
    Theta(f64),
    #[error("n = {n} is below the minimum {min}{reason}")]
    TooFewParticles { n: usize, min: usize, reason: String },
    #[error("horizon must be finite and >= 0, got {0}")]
    Horizon(f64),
    #[error("snapshot_interval must be finite and > 0, got {0}")]
    SnapshotInterval(f64),
    #[error("step policy: {0}")]
    StepPolicy(String),
    #[error("detector (k={k}, ell={ell}): {msg}")]
    Detector { k: usize, ell: f64, msg: String },
    #[error("theta = {0} >= 2 requires a k=3 collapse detector")]
    MissingTripleDetector(f64),
    #[error("replicas must be >= 1")]
    Replicas,
    #[error(transparent)]
    Law(#[from] InitError),
}

/// Adaptive step-size and taming policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    pub dt_max: f64,
    /// `p` in `dt <= c0 * dmin^p`.
    pub proximity_exponent: f64,
    /// `c0` in `dt <= c0 * dmin^p`.
    pub proximity_gain: f64,
    /// Per-particle cap on the drift displacement, as a fraction of the
    /// distance to the nearest other particle.
    pub taming_cap: f64,
    /// Smallest step ever taken. `None` means `1e-12 * dt_max`.
    pub substep_floor: Option<f64>,
    /// Consecutive floor-sized steps tolerated before giving up.
    pub max_floor_streak: u64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            dt_max: 1e-3,
            proximity_exponent: 2.0,
            proximity_gain: 0.5,
            taming_cap: 0.25,
            substep_floor: None,
            max_floor_streak: 100_000,
        }
    }
}

impl StepPolicy {
    pub fn floor(&self) -> f64 {
        self.substep_floor.unwrap_or(1e-12 * self.dt_max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::StepPolicy(m));
        let floor = self.floor();
        if !(self.dt_max.is_finite() && self.dt_max > floor && floor > 0.0) {
            return err(format!("need dt_max > substep_floor > 0, got {} and {floor}", self.dt_max));
        }
        if !(self.taming_cap > 0.0 && self.taming_cap < 1.0) {
            return err(format!("taming_cap must lie in (0, 1), got {}", self.taming_cap));
        }
        if !(self.proximity_exponent > 0.0 && self.proximity_exponent.is_finite()) {
            return err(format!("proximity_exponent must be > 0, got {}", self.proximity_exponent));
        }
        if !(self.proximity_gain > 0.0 && self.proximity_gain.is_finite()) {
            return err(format!("proximity_gain must be > 0, got {}", self.proximity_gain));
        }
        if self.max_floor_streak == 0 {
            return err("max_floor_streak must be >= 1".into());
        }
        Ok(())
    }
}

/// Fires at the first time some size-`k` cluster has dispersion `<= 1/ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseDetector {
    pub k: usize,
    pub ell: f64,
}

impl CollapseDetector {
    pub fn new(k: usize, ell: f64) -> Self {
        CollapseDetector { k, ell }
    }

    pub fn threshold(&self) -> f64 {
        1.0 / self.ell
    }

    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        let err = |msg: &str| Err(ConfigError::Detector { k: self.k, ell: self.ell, msg: msg.into() });
        if self.k < 2 || self.k > n {
            return err("k must lie in [2, n]");
        }
        if !(self.ell >= 1.0 && self.ell.is_finite()) {
            return err("ell must be finite and >= 1");
        }
        Ok(())
    }
}

/// Evaluation strategy for the O(N^2) drift sum. Both are deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKernel {
    /// Serial loop over unordered pairs, each pair evaluated once.
    #[default]
    Symmetric,
    /// Row-parallel loop; every row sums over `j` in index order.
    Parallel,
}

fn default_replicas() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub theta: f64,
    pub n: usize,
    pub horizon: f64,
    pub snapshot_interval: f64,
    #[serde(default)]
    pub step: StepPolicy,
    #[serde(default)]
    pub detectors: Vec<CollapseDetector>,
    pub law: InitialLaw,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub drift_kernel: DriftKernel,
}

/// `N_0 = max(1 + ceil(2 / (2 - theta)), 5)` for `0 < theta < 2`.
pub fn subcritical_min_particles(theta: f64) -> usize {
    let raw = 2.0 / (2.0 - theta);
    // Snap ratios that are integers up to rounding, e.g. theta = 1.8.
    let c = if (raw - raw.round()).abs() <= 1e-9 * raw { raw.round() } else { raw.ceil() };
    (1.0 + c).max(MIN_PARTICLES as f64) as usize
}

impl SimConfig {
    pub fn new(theta: f64, n: usize, horizon: f64, law: InitialLaw) -> Self {
        SimConfig {
            theta,
            n,
            horizon,
            snapshot_interval: (horizon / 100.0).max(1e-3),
            step: StepPolicy::default(),
            detectors: Vec::new(),
            law,
            replicas: 1,
            master_seed: 0,
            drift_kernel: DriftKernel::default(),
        }
    }

    pub fn with_detector(mut self, k: usize, ell: f64) -> Self {
        self.detectors.push(CollapseDetector::new(k, ell));
        self
    }

    /// Largest `ell` over the `k = 3` detectors; firing there ends the run.
    pub fn blowup_detector(&self) -> Option<CollapseDetector> {
        self.detectors
            .iter()
            .filter(|d| d.k == 3)
            .copied()
            .max_by(|a, b| a.ell.total_cmp(&b.ell))
    }

    /// Checks needed for the integrator alone; `theta = 0` and any `n >= 2`
    /// are allowed.
    pub fn validate_dynamics(&self) -> Result<(), ConfigError> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(ConfigError::Theta(self.theta));
        }
        if self.n < 2 {
            return Err(ConfigError::TooFewParticles { n: self.n, min: 2, reason: String::new() });
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::Horizon(self.horizon));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            return Err(ConfigError::SnapshotInterval(self.snapshot_interval));
        }
        self.step.validate()?;
        for d in &self.detectors {
            d.validate(self.n)?;
        }
        Ok(())
    }

    /// Full validation for experiment runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(ConfigError::Theta(self.theta));
        }
        if self.n < MIN_PARTICLES {
            return Err(ConfigError::TooFewParticles {
                n: self.n,
                min: MIN_PARTICLES,
                reason: String::new(),
            });
        }
        if self.theta < 2.0 {
            let n0 = subcritical_min_particles(self.theta);
            if self.n < n0 {
                return Err(ConfigError::TooFewParticles {
                    n: self.n,
                    min: n0,
                    reason: format!(" (N0 = 1 + ceil(2/(2 - {})) for subcritical theta)", self.theta),
                });
            }
        }
        if self.replicas == 0 {
            return Err(ConfigError::Replicas);
        }
        self.validate_dynamics()?;
        if self.theta >= 2.0 && self.blowup_detector().is_none() {
            return Err(ConfigError::MissingTripleDetector(self.theta));
        }
        self.law.validate()?;
        Ok(())
    }
}
