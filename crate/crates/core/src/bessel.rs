//! Squared Bessel reference simulator.
//!
//! Euler scheme for `dZ = 2 sqrt(Z+) dW + d dt`. Negative values are clamped
//! to 0 and the path continues (reflection), or stays at 0 forever when
//! `absorb_at_zero` is set.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::RSeries;
use crate::seeding::ReplicaSeed;

/// Level below which a path counts as having hit zero.
pub const HIT_THRESHOLD: f64 = 1e-9;
pub const MIN_HITTING_REPLICAS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum BesselError {
    #[error("invalid Bessel configuration: {0}")]
    Invalid(String),
    #[error("need at least {MIN_HITTING_REPLICAS} replicas, got {0}")]
    TooFewReplicas(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesselConfig {
    pub dimension: f64,
    pub z0: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub absorb_at_zero: bool,
}

impl BesselConfig {
    pub fn validate(&self) -> Result<(), BesselError> {
        let bad = |m: &str| Err(BesselError::Invalid(m.into()));
        if !(self.dimension >= 0.0 && self.dimension.is_finite()) {
            return bad("dimension must be finite and >= 0");
        }
        if !(self.z0 >= 0.0 && self.z0.is_finite()) {
            return bad("z0 must be finite and >= 0");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be > 0");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be finite and >= 0");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Walks the Euler chain, calling `visit(step, z)` on every state including
/// the initial one; stops early when `visit` returns `false`.
fn walk<R: Rng + ?Sized>(cfg: &BesselConfig, rng: &mut R, mut visit: impl FnMut(usize, f64) -> bool) {
    let steps = cfg.steps();
    let sq = cfg.dt.sqrt();
    let mut z = cfg.z0;
    let mut absorbed = cfg.absorb_at_zero && z == 0.0;
    if !visit(0, z) {
        return;
    }
    for k in 1..=steps {
        if !absorbed {
            let xi: f64 = rng.sample(StandardNormal);
            z += cfg.dimension * cfg.dt + 2.0 * z.max(0.0).sqrt() * sq * xi;
            if z <= 0.0 {
                z = 0.0;
                absorbed = cfg.absorb_at_zero;
            }
        }
        if !visit(k, z) {
            return;
        }
    }
}

/// Path recorded every `stride` steps (and at the final step).
pub fn simulate_bessel_strided<R: Rng + ?Sized>(cfg: &BesselConfig, stride: usize, rng: &mut R) -> Result<RSeries, BesselError> {
    cfg.validate()?;
    if stride == 0 {
        return Err(BesselError::Invalid("stride must be >= 1".into()));
    }
    let steps = cfg.steps();
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut values = Vec::with_capacity(steps / stride + 2);
    walk(cfg, rng, |k, z| {
        if k % stride == 0 || k == steps {
            times.push(k as f64 * cfg.dt);
            values.push(z);
        }
        true
    });
    Ok(RSeries::new(times, values, None))
}

/// Full path on the `dt` grid.
pub fn simulate_bessel<R: Rng + ?Sized>(cfg: &BesselConfig, rng: &mut R) -> Result<RSeries, BesselError> {
    simulate_bessel_strided(cfg, 1, rng)
}

/// Whether one path goes below [`HIT_THRESHOLD`] before the horizon.
pub fn hits_zero<R: Rng + ?Sized>(cfg: &BesselConfig, rng: &mut R) -> bool {
    let mut hit = false;
    walk(cfg, rng, |_, z| {
        hit = z < HIT_THRESHOLD;
        !hit
    });
    hit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingSummary {
    pub fraction: f64,
    pub hits: usize,
    pub replicas: usize,
    pub threshold: f64,
    pub dt: f64,
}

/// Fraction of `replicas` independent paths that hit zero. Replica `i` uses
/// `ReplicaSeed::derive(master_seed, cell, i)`.
pub fn zero_hitting_fraction(cfg: &BesselConfig, replicas: usize, master_seed: u64, cell: u64) -> Result<HittingSummary, BesselError> {
    cfg.validate()?;
    if replicas < MIN_HITTING_REPLICAS {
        return Err(BesselError::TooFewReplicas(replicas));
    }
    let hits = (0..replicas as u64)
        .into_par_iter()
        .map(|i| hits_zero(cfg, &mut ReplicaSeed::derive(master_seed, cell, i).dynamics_rng()) as usize)
        .sum::<usize>();
    Ok(HittingSummary { fraction: hits as f64 / replicas as f64, hits, replicas, threshold: HIT_THRESHOLD, dt: cfg.dt })
}

/// `E[Z_t] = z0 + d t`.
pub fn expected_mean(z0: f64, dimension: f64, t: f64) -> f64 {
    z0 + dimension * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_u64;

    #[test]
    fn zero_dimension_from_zero_stays_zero() {
        for absorb in [false, true] {
            let cfg = BesselConfig { dimension: 0.0, z0: 0.0, horizon: 1.0, dt: 1e-3, absorb_at_zero: absorb };
            let p = simulate_bessel(&cfg, &mut rng_from_u64(1)).unwrap();
            assert_eq!(p.values.len(), 1001);
            assert!(p.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn paths_are_nonnegative_and_absorption_sticks() {
        let cfg = BesselConfig { dimension: 0.5, z0: 0.2, horizon: 2.0, dt: 1e-3, absorb_at_zero: true };
        let p = simulate_bessel(&cfg, &mut rng_from_u64(2)).unwrap();
        assert!(p.values.iter().all(|&v| v >= 0.0));
        if let Some(i) = p.values.iter().position(|&v| v == 0.0) {
            assert!(p.values[i..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn strided_grid() {
        let cfg = BesselConfig { dimension: 2.0, z0: 1.0, horizon: 1.0, dt: 0.01, absorb_at_zero: false };
        let p = simulate_bessel_strided(&cfg, 10, &mut rng_from_u64(3)).unwrap();
        assert_eq!(p.times.len(), 11);
        assert!((p.times[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let cfg = BesselConfig { dimension: -1.0, z0: 1.0, horizon: 1.0, dt: 0.01, absorb_at_zero: false };
        assert!(cfg.validate().is_err());
        let ok = BesselConfig { dimension: 1.0, ..cfg };
        assert!(matches!(zero_hitting_fraction(&ok, 10, 0, 0), Err(BesselError::TooFewReplicas(10))));
    }
}
