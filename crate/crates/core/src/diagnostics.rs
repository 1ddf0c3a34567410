//! Estimators for the finite-N identities satisfied by the particle system.
//!
//! Most of them work on [`RSeries`], the global dispersion `R_{[1,N]}`
//! sampled on a snapshot grid, which is a squared Bessel process of dimension
//! `(N-1)(2-theta)` up to blow-up.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{first_collapse_time, Snapshot, TrajectoryRecord};
use crate::geometry::{g_functional, total_dispersion, ExtendedReal, Point2};
use crate::stats::{mann_whitney_greater, median, ols_through_origin, quantile};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("gamma = {gamma} must lie in (theta, 2) = ({theta}, 2)")]
    GammaOutOfRange { gamma: f64, theta: f64 },
    #[error("paths do not share a common time grid")]
    InconsistentGrid,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

// ---------------------------------------------------------------------------
// Dimensions

/// `d_{theta,N}(k) = (k-1)(2 - k theta / N)`.
pub fn dimension(theta: f64, n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    (k - 1.0) * (2.0 * n - k * theta) / n
}

/// `N * d_{2,N}(k) = 2 (k-1)(N-k)`, exact in integers.
pub fn critical_dimension_times_n(n: u64, k: u64) -> i128 {
    2 * (k as i128 - 1) * (n as i128 - k as i128)
}

/// `k2 = min{k >= 3 : d_{2,N}(k) < 2}`, computed in integers.
pub fn critical_k2(n: u64) -> Option<u64> {
    (3..=n).find(|&k| critical_dimension_times_n(n, k) < 2 * n as i128)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTable {
    pub theta: f64,
    pub n: usize,
    /// `(k, d_{theta,N}(k))` for `k = 2..=N`.
    pub dims: Vec<(usize, f64)>,
    /// Only populated at `theta = 2`.
    pub k2: Option<usize>,
}

impl DimensionTable {
    pub fn get(&self, k: usize) -> Option<f64> {
        self.dims.iter().find(|(kk, _)| *kk == k).map(|(_, d)| *d)
    }
}

pub fn dimension_table(theta: f64, n: usize) -> Result<DimensionTable, DiagnosticsError> {
    if n < 5 {
        return Err(DiagnosticsError::InvalidArgument(format!("n must be >= 5, got {n}")));
    }
    let dims = (2..=n).map(|k| (k, dimension(theta, n, k))).collect();
    let k2 = if theta == 2.0 { critical_k2(n as u64).map(|k| k as usize) } else { None };
    Ok(DimensionTable { theta, n, dims, k2 })
}

// ---------------------------------------------------------------------------
// Dispersion paths

/// A scalar path on a snapshot grid, with the blow-up time of its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub blowup: Option<f64>,
}

impl RSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, blowup: Option<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        RSeries { times, values, blowup }
    }

    pub fn scaled(&self, c: f64) -> RSeries {
        RSeries::new(self.times.clone(), self.values.iter().map(|v| v * c).collect(), self.blowup)
    }

    /// Last time used for estimation: 90% of the blow-up time, or the end of
    /// the series.
    pub fn window_end(&self) -> f64 {
        self.window_end_keeping(BLOWUP_KEEP_FRACTION)
    }

    pub fn window_end_keeping(&self, keep: f64) -> f64 {
        let end = self.times.last().copied().unwrap_or(0.0);
        match self.blowup {
            Some(tau) => (keep * tau).min(end),
            None => end,
        }
    }

    /// Linear interpolation, clamped to the ends.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        let i = ts.partition_point(|&s| s <= t);
        if i >= ts.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (ts[i - 1], ts[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] + w * (self.values[i] - self.values[i - 1])
    }
}

/// `R_{[1,N]}` at every snapshot.
pub fn global_dispersion_path(record: &TrajectoryRecord) -> RSeries {
    RSeries::new(
        record.snapshots.iter().map(|s| s.t).collect(),
        record.snapshots.iter().map(|s| total_dispersion(&s.positions)).collect(),
        record.blowup_time,
    )
}

/// `V = R / N`, the empirical variance.
pub fn variance_path(record: &TrajectoryRecord) -> RSeries {
    global_dispersion_path(record).scaled(1.0 / record.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Longest time span used.
    pub window: f64,
}

impl DriftEstimate {
    pub fn z_score(&self, target: f64) -> f64 {
        (self.slope - target) / self.stderr
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        (self.slope - target).abs() / target.abs()
    }
}

pub const MIN_DRIFT_REPLICAS: usize = 30;
/// Fraction of a blown-up path's lifetime used by the drift estimators.
pub const BLOWUP_KEEP_FRACTION: f64 = 0.9;

/// Ratio estimator of `d` in `E[R_{t ^ w} - R_0] = d E[t ^ w]`.
///
/// For each grid time `t_k` the replica means of the stopped increment and of
/// the stopped time are formed, and `d` is the least-squares slope through
/// the origin of the former on the latter. Blown-up paths are stopped at 90%
/// of their blow-up time. The standard error is the delta-method one built
/// from per-replica influence values.
pub fn stopped_drift_slope(paths: &[RSeries]) -> Result<DriftEstimate, DiagnosticsError> {
    stopped_drift_slope_keeping(paths, BLOWUP_KEEP_FRACTION)
}

/// As [`stopped_drift_slope`], stopping blown-up paths at `keep * tau`.
pub fn stopped_drift_slope_keeping(paths: &[RSeries], keep: f64) -> Result<DriftEstimate, DiagnosticsError> {
    if paths.len() < MIN_DRIFT_REPLICAS {
        return Err(DiagnosticsError::InsufficientData(format!(
            "{} replicas, need at least {MIN_DRIFT_REPLICAS}",
            paths.len()
        )));
    }
    let grid = &paths[0].times;
    if paths.iter().any(|p| p.times != *grid) {
        return Err(DiagnosticsError::InconsistentGrid);
    }
    if paths.iter().flat_map(|p| &p.values).any(|v| !v.is_finite()) {
        return Err(DiagnosticsError::NonFinite("dispersion path".into()));
    }
    let grid: Vec<f64> = grid.iter().copied().filter(|&t| t > grid[0]).collect();
    if grid.is_empty() {
        return Err(DiagnosticsError::InsufficientData("a single grid time".into()));
    }
    let nr = paths.len();
    let t0 = paths[0].times[0];
    // a[r][k]: stopped increment, c[r][k]: stopped elapsed time.
    let mut a = vec![vec![0.0; grid.len()]; nr];
    let mut c = vec![vec![0.0; grid.len()]; nr];
    for (r, p) in paths.iter().enumerate() {
        let w = p.window_end_keeping(keep);
        let r0 = p.values[0];
        for (k, &t) in grid.iter().enumerate() {
            let s = t.min(w);
            a[r][k] = p.at(s) - r0;
            c[r][k] = s - t0;
        }
    }
    let nf = nr as f64;
    let m: Vec<f64> = (0..grid.len()).map(|k| a.iter().map(|row| row[k]).sum::<f64>() / nf).collect();
    let s: Vec<f64> = (0..grid.len()).map(|k| c.iter().map(|row| row[k]).sum::<f64>() / nf).collect();
    let num: f64 = m.iter().zip(&s).map(|(m, s)| m * s).sum();
    let den: f64 = s.iter().map(|s| s * s).sum();
    if den <= 0.0 {
        return Err(DiagnosticsError::InsufficientData("zero-length window".into()));
    }
    let slope = num / den;
    let mut ss = 0.0;
    for r in 0..nr {
        let mut inf = 0.0;
        for k in 0..grid.len() {
            let da = a[r][k] - m[k];
            let dc = c[r][k] - s[k];
            inf += da * s[k] + m[k] * dc - 2.0 * slope * s[k] * dc;
        }
        inf /= den;
        ss += inf * inf;
    }
    let stderr = (ss / (nf * (nf - 1.0))).sqrt();
    let window = s.iter().copied().fold(0.0, f64::max);
    Ok(DriftEstimate { slope, stderr, n_samples: nr, window })
}

/// Drift of `R_{[1,N]}`; compare with [`bessel_drift_target`].
pub fn bessel_drift_test(paths: &[RSeries]) -> Result<DriftEstimate, DiagnosticsError> {
    stopped_drift_slope(paths)
}

pub fn bessel_drift_target(theta: f64, n: usize) -> f64 {
    (n as f64 - 1.0) * (2.0 - theta)
}

/// Drift of `V = R/N` from the dispersion paths; the target is
/// `(1 - 1/N)(2 - theta)`.
pub fn variance_drift_test(paths: &[RSeries], n: usize) -> Result<DriftEstimate, DiagnosticsError> {
    let scaled: Vec<RSeries> = paths.iter().map(|p| p.scaled(1.0 / n as f64)).collect();
    stopped_drift_slope(&scaled)
}

pub fn variance_drift_target(theta: f64, n: usize) -> f64 {
    (1.0 - 1.0 / n as f64) * (2.0 - theta)
}

/// Quadratic-variation rate: least squares through the origin of
/// `(dR - drift dt)^2` on `4 R dt` over consecutive snapshot pairs inside
/// each path's window. Slope 1 for a squared Bessel process.
///
/// When `drift` is `None` it is estimated as `sum dR / sum dt`.
pub fn bessel_qv_test(paths: &[RSeries], drift: Option<f64>) -> Result<DriftEstimate, DiagnosticsError> {
    let mut incs: Vec<(f64, f64, f64)> = Vec::new();
    let mut window: f64 = 0.0;
    for p in paths {
        let w = p.window_end();
        for i in 1..p.times.len() {
            if p.times[i] > w {
                break;
            }
            let dt = p.times[i] - p.times[i - 1];
            if dt <= 0.0 {
                continue;
            }
            incs.push((p.values[i - 1], p.values[i] - p.values[i - 1], dt));
            window = window.max(p.times[i] - p.times[0]);
        }
    }
    if incs.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no increments".into()));
    }
    let d = drift.unwrap_or_else(|| {
        let (sr, st) = incs.iter().fold((0.0, 0.0), |(a, b), &(_, dr, dt)| (a + dr, b + dt));
        sr / st
    });
    let x: Vec<f64> = incs.iter().map(|&(r, _, dt)| 4.0 * r * dt).collect();
    let y: Vec<f64> = incs.iter().map(|&(_, dr, dt)| (dr - d * dt).powi(2)).collect();
    let fit = ols_through_origin(&x, &y).ok_or_else(|| DiagnosticsError::InsufficientData("all regressors zero".into()))?;
    Ok(DriftEstimate { slope: fit.slope, stderr: fit.stderr, n_samples: incs.len(), window })
}

// ---------------------------------------------------------------------------
// Pair moments

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIntegral {
    pub gamma: f64,
    pub value: f64,
    pub horizon: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// All-pairs mean of `|x_i - x_j|^(gamma - 2)`.
pub fn pair_power_mean(positions: &[Point2], gamma: f64) -> f64 {
    let n = positions.len();
    let e = 0.5 * (gamma - 2.0);
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += (positions[i] - positions[j]).norm_sq().powf(e);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Trapezoid integral of `f` over `[t_0, min(horizon, last alive time)]`,
/// interpolating linearly when `horizon` falls inside a segment.
fn integrate_alive(snaps: &[Snapshot], horizon: f64, f: &dyn Fn(&[Point2]) -> f64) -> Result<f64, DiagnosticsError> {
    let alive: Vec<&Snapshot> = snaps.iter().take_while(|s| s.alive).collect();
    let Some(first) = alive.first() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    let mut prev = (first.t, f(&first.positions));
    if !prev.1.is_finite() {
        return Err(DiagnosticsError::NonFinite(format!("integrand at t = {}", prev.0)));
    }
    for s in &alive[1..] {
        if prev.0 >= horizon {
            break;
        }
        let v = f(&s.positions);
        if !v.is_finite() {
            return Err(DiagnosticsError::NonFinite(format!("integrand at t = {}", s.t)));
        }
        if s.t > horizon {
            let w = (horizon - prev.0) / (s.t - prev.0);
            let vh = prev.1 + w * (v - prev.1);
            total += 0.5 * (horizon - prev.0) * (prev.1 + vh);
            break;
        }
        total += 0.5 * (s.t - prev.0) * (prev.1 + v);
        prev = (s.t, v);
    }
    Ok(total)
}

/// Replica mean of `int_0^T mean_{i<j} |x_i - x_j|^(gamma-2) dt`, restricted to
/// pre-blow-up snapshots.
pub fn pair_moment_integral(records: &[TrajectoryRecord], gamma: f64, horizon: f64) -> Result<MomentIntegral, DiagnosticsError> {
    let Some(first) = records.first() else {
        return Err(DiagnosticsError::InsufficientData("no records".into()));
    };
    let theta = first.theta;
    if !(gamma > theta && gamma < 2.0) {
        return Err(DiagnosticsError::GammaOutOfRange { gamma, theta });
    }
    let vals = records
        .iter()
        .map(|r| integrate_alive(&r.snapshots, horizon, &|x| pair_power_mean(x, gamma)))
        .collect::<Result<Vec<f64>, _>>()?;
    let value = crate::stats::mean(&vals);
    let stderr = if vals.len() > 1 { crate::stats::std_err(&vals) } else { 0.0 };
    Ok(MomentIntegral { gamma, value, horizon, stderr, replicas: vals.len() })
}

/// `phi_a(r) = (r + a)^(gamma/2) / (1 + (r + a)^(gamma/2))`, applied to squared
/// pair distances.
pub fn phi_a(r: f64, a: f64, gamma: f64) -> f64 {
    let p = (r + a).powf(0.5 * gamma);
    p / (1.0 + p)
}

/// `phi_eta(r) = (r + eta) log(1 + 1/(r + eta))`.
pub fn phi_eta(r: f64, eta: f64) -> f64 {
    let u = r + eta;
    u * (1.0 / u).ln_1p()
}

/// All-pairs mean of `f(|x_i - x_j|^2)` at every snapshot. Optional monitor,
/// no acceptance target.
pub fn pair_functional_series(record: &TrajectoryRecord, f: &dyn Fn(f64) -> f64) -> Vec<(f64, f64)> {
    record
        .pre_blowup()
        .iter()
        .filter(|s| s.alive)
        .map(|s| {
            let x = &s.positions;
            let n = x.len();
            let mut sum = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    sum += f((x[i] - x[j]).norm_sq());
                }
            }
            (s.t, sum / (n * (n - 1) / 2) as f64)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// G functional

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSample {
    pub t: f64,
    /// Mean over the evaluated triples; infinite as soon as one is.
    pub mean: ExtendedReal,
    /// Mean over the triples with a finite value.
    pub finite_mean: f64,
    /// Number of triples evaluating to the infinite sentinel.
    pub exceedances: usize,
    pub triples: usize,
}

pub const G_FULL_ENUMERATION_MAX_N: usize = 32;

fn g_sample(t: f64, x: &[Point2], triples: &mut dyn Iterator<Item = (usize, usize, usize)>) -> GSample {
    let (mut sum, mut count, mut inf) = (0.0, 0usize, 0usize);
    for (i, j, k) in triples {
        match g_functional(x[i], x[j], x[k]) {
            ExtendedReal::Finite(v) => sum += v,
            ExtendedReal::Infinite => inf += 1,
        }
        count += 1;
    }
    let finite = count - inf;
    let finite_mean = if finite > 0 { sum / finite as f64 } else { 0.0 };
    let mean = if inf > 0 { ExtendedReal::Infinite } else { ExtendedReal::Finite(finite_mean) };
    GSample { t, mean, finite_mean, exceedances: inf, triples: count }
}

/// `G` averaged over index triples at each alive snapshot: every triple when
/// `N <= 32`, otherwise `triple_budget` uniformly drawn distinct triples.
pub fn g_functional_monitor<R: Rng + ?Sized>(
    record: &TrajectoryRecord,
    triple_budget: usize,
    rng: &mut R,
) -> Result<Vec<GSample>, DiagnosticsError> {
    if triple_budget == 0 {
        return Err(DiagnosticsError::InvalidArgument("triple_budget must be >= 1".into()));
    }
    let snaps = record.snapshots.iter().take_while(|s| s.alive);
    Ok(snaps.map(|s| g_functional_at(s.t, &s.positions, triple_budget, rng)).collect())
}

pub fn g_functional_at<R: Rng + ?Sized>(t: f64, x: &[Point2], triple_budget: usize, rng: &mut R) -> GSample {
    let n = x.len();
    if n <= G_FULL_ENUMERATION_MAX_N {
        let mut it = (0..n).flat_map(|i| ((i + 1)..n).flat_map(move |j| ((j + 1)..n).map(move |k| (i, j, k))));
        g_sample(t, x, &mut it)
    } else {
        let draws: Vec<(usize, usize, usize)> = (0..triple_budget)
            .map(|_| {
                let v = sample(rng, n, 3);
                (v.index(0), v.index(1), v.index(2))
            })
            .collect();
        g_sample(t, x, &mut draws.into_iter())
    }
}

/// Trapezoid integral of the finite means, or the sentinel when any sample
/// saturates.
pub fn integrate_g(samples: &[GSample]) -> ExtendedReal {
    if samples.iter().any(|s| s.exceedances > 0) {
        return ExtendedReal::Infinite;
    }
    let total = samples.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].finite_mean + w[1].finite_mean)).sum();
    ExtendedReal::Finite(total)
}

// ---------------------------------------------------------------------------
// Explosion times

pub const MIN_EXPLOSION_REPLICAS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplosionRow {
    pub n: usize,
    pub ell: f64,
    pub replicas: usize,
    pub fired: usize,
    /// Non-fired replicas count as `+inf`, so these may be infinite.
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub n_lo: usize,
    pub n_hi: usize,
    pub u: f64,
    /// One-sided p-value for "times at n_hi tend to exceed those at n_lo".
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionSummary {
    pub rows: Vec<ExplosionRow>,
    pub tests: Vec<RankTest>,
    pub hypothesis_violating: bool,
}

impl ExplosionSummary {
    pub fn medians_nondecreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].median <= w[1].median)
    }

    pub fn medians_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].median < w[1].median)
    }

    pub fn all_significant(&self, alpha: f64) -> bool {
        self.tests.iter().all(|t| t.p_value < alpha)
    }
}

/// One group of replicas at a given `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplosionGroup {
    pub n: usize,
    pub ell: f64,
    /// First `k = 3` collapse time per replica, `None` when it never fired.
    pub times: Vec<Option<f64>>,
}

impl ExplosionGroup {
    pub fn from_records(n: usize, ell: f64, records: &[TrajectoryRecord]) -> Self {
        ExplosionGroup { n, ell, times: records.iter().map(|r| first_collapse_time(r, 3, ell)).collect() }
    }
}

pub fn explosion_time_summary(groups: &[ExplosionGroup], hypothesis_violating: bool) -> Result<ExplosionSummary, DiagnosticsError> {
    if groups.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no groups".into()));
    }
    let mut groups = groups.to_vec();
    groups.sort_by_key(|g| g.n);
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for g in &groups {
        if g.times.len() < MIN_EXPLOSION_REPLICAS {
            return Err(DiagnosticsError::InsufficientData(format!(
                "N = {}: {} replicas, need at least {MIN_EXPLOSION_REPLICAS}",
                g.n,
                g.times.len()
            )));
        }
        let v: Vec<f64> = g.times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
        let (q25, q75) = (quantile(&v, 0.25), quantile(&v, 0.75));
        rows.push(ExplosionRow {
            n: g.n,
            ell: g.ell,
            replicas: v.len(),
            fired: g.times.iter().filter(|t| t.is_some()).count(),
            median: median(&v),
            q25,
            q75,
            iqr: q75 - q25,
        });
        samples.push(v);
    }
    let tests = (1..groups.len())
        .map(|i| {
            let (u, p) = mann_whitney_greater(&samples[i - 1], &samples[i]);
            RankTest { n_lo: groups[i - 1].n, n_hi: groups[i].n, u, p_value: p }
        })
        .collect();
    if hypothesis_violating {
        log::warn!("explosion summary computed on an initial law outside the critical-case hypothesis");
    }
    Ok(ExplosionSummary { rows, tests, hypothesis_violating })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_examples() {
        let t5 = dimension_table(2.0, 5).unwrap();
        assert!((t5.get(3).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(t5.k2, Some(3));
        let t6 = dimension_table(2.0, 6).unwrap();
        assert_eq!(t6.get(3), Some(2.0));
        assert_eq!(t6.get(4), Some(2.0));
        assert!((t6.get(5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(t6.k2, Some(5));
        for n in 5..200 {
            assert_eq!(dimension(2.0, n, n), 0.0);
        }
        assert_eq!(dimension_table(1.0, 6).unwrap().k2, None);
        assert!(dimension_table(2.0, 4).is_err());
    }

    #[test]
    fn rseries_interpolation() {
        let p = RSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 6.0], Some(1.0));
        assert_eq!(p.at(0.5), 1.0);
        assert_eq!(p.at(1.5), 4.0);
        assert_eq!(p.at(5.0), 6.0);
        assert_eq!(p.window_end(), 0.9);
    }

    #[test]
    fn qv_constant_series_is_zero() {
        let p = RSeries::new(vec![0.0, 0.1, 0.2, 0.3], vec![2.0; 4], None);
        let est = bessel_qv_test(&[p], None).unwrap();
        assert_eq!(est.slope, 0.0);
        let z = RSeries::new(vec![0.0, 0.1], vec![0.0; 2], None);
        assert!(matches!(bessel_qv_test(&[z], None), Err(DiagnosticsError::InsufficientData(_))));
    }

    #[test]
    fn drift_requires_replicas() {
        let p = RSeries::new(vec![0.0, 1.0], vec![0.0, 1.0], None);
        assert!(matches!(stopped_drift_slope(&vec![p; 5]), Err(DiagnosticsError::InsufficientData(_))));
    }

    #[test]
    fn deterministic_linear_paths_give_exact_slope() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let paths: Vec<RSeries> = (0..40)
            .map(|r| {
                let r0 = r as f64;
                RSeries::new(times.clone(), times.iter().map(|t| r0 + 3.0 * t).collect(), None)
            })
            .collect();
        let est = stopped_drift_slope(&paths).unwrap();
        assert!((est.slope - 3.0).abs() < 1e-12);
        assert!(est.stderr < 1e-12);
    }

    #[test]
    fn explosion_summary_orders_and_flags() {
        let g = |n: usize, base: f64| ExplosionGroup {
            n,
            ell: n as f64,
            times: (0..60).map(|i| if i % 10 == 9 { None } else { Some(base + i as f64 * 0.01) }).collect(),
        };
        let s = explosion_time_summary(&[g(32, 2.0), g(8, 1.0), g(128, 3.0)], true).unwrap();
        assert_eq!(s.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 32, 128]);
        assert!(s.medians_strictly_increasing());
        assert!(s.all_significant(0.05));
        assert!(s.hypothesis_violating);
        assert_eq!(s.rows[0].fired, 54);
        let small = ExplosionGroup { n: 8, ell: 8.0, times: vec![Some(1.0); 10] };
        assert!(explosion_time_summary(&[small], false).is_err());
    }

    #[test]
    fn g_monitor_flags_coincident_pair() {
        let x = vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let mut rng = crate::seeding::rng_from_u64(1);
        let s = g_functional_at(0.0, &x, 10, &mut rng);
        assert_eq!(s.triples, 4);
        assert!(s.exceedances >= 1);
        assert!(s.mean.is_infinite());
    }

    #[test]
    fn proof_functionals() {
        assert!((phi_a(0.0, 1.0, 1.5) - 0.5).abs() < 1e-15);
        assert!((phi_eta(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    }
}
