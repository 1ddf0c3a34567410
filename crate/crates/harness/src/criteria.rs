//! Acceptance criteria, evaluated on diagnostics reports or computed
//! directly when they need no simulation runs.

use std::collections::BTreeMap;

use kslab::bessel::{simulate_bessel_strided, zero_hitting_fraction, BesselConfig};
use kslab::diagnostics::{
    bessel_drift_target, bessel_qv_test, critical_dimension_times_n, critical_k2, explosion_time_summary, ExplosionGroup,
    RSeries,
};
use kslab::geometry::{barycentre_gap, LogKernelWeight, Point2, PowerWeight, RadialWeight};
use kslab::seeding::{rng_from_u64, ReplicaSeed};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::report::DiagnosticsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u8, name: &str, status: Status, detail: String) -> Self {
        CriterionResult { id, name: name.into(), status, detail }
    }

    fn judged(id: u8, name: &str, ok: bool, detail: String) -> Self {
        Self::new(id, name, if ok { Status::Pass } else { Status::Fail }, detail)
    }

    fn not_applicable(id: u8, name: &str, why: &str) -> Self {
        Self::new(id, name, Status::NotApplicable, why.into())
    }

    /// `C<id> PASS|FAIL|N/A <name>: <detail>`.
    pub fn line(&self) -> String {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        };
        format!("C{} {s} {}: {}", self.id, self.name, self.detail)
    }
}

pub const DRIFT_REL_TOL: f64 = 0.10;
pub const CRITICAL_DRIFT_Z: f64 = 3.0;
pub const QV_RANGE: (f64, f64) = (0.85, 1.15);
pub const MOMENT_SPREAD_MAX: f64 = 1.5;
pub const MOMENT_GROWTH_MAX: f64 = 2.5;
pub const PHASE_FRACTION: f64 = 0.99;
pub const EXPLOSION_ALPHA: f64 = 0.05;
/// Allowed RMS ratio is this factor times `sqrt(N_small / N_large)`.
pub const RESIDUAL_SLACK: f64 = 1.2;
pub const CENTROID_REL_TOL: f64 = 0.10;
/// Minimum replicas for a run to count toward the drift and centroid criteria.
pub const DRIFT_MIN_REPLICAS: usize = 300;
pub const CENTROID_MIN_REPLICAS: usize = 500;

fn theta_key(t: f64) -> u64 {
    t.to_bits()
}

pub fn dispersion_drift(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "dispersion drift";
    let rows: Vec<_> = reports
        .iter()
        .filter(|r| r.theta < 2.0 && r.replicas >= DRIFT_MIN_REPLICAS)
        .filter_map(|r| r.dispersion_drift.map(|d| (r, d)))
        .collect();
    if rows.is_empty() {
        return CriterionResult::not_applicable(1, name, &format!("no subcritical run with drift estimates and >= {DRIFT_MIN_REPLICAS} replicas"));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, d) in rows {
        let rel = d.estimate.value / d.target - 1.0;
        ok &= rel.abs() <= DRIFT_REL_TOL;
        parts.push(format!("theta={} N={}: {:.3}+-{:.3} vs {} ({:+.1}%)", r.theta, r.n, d.estimate.value, d.estimate.stderr, d.target, 100.0 * rel));
    }
    CriterionResult::judged(1, name, ok, parts.join("; "))
}

pub fn critical_zero_drift(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "critical zero drift";
    let rows: Vec<_> = reports.iter().filter(|r| r.theta == 2.0).filter_map(|r| r.dispersion_drift.map(|d| (r, d))).collect();
    if rows.is_empty() {
        return CriterionResult::not_applicable(2, name, "no critical run with drift estimates");
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, d) in rows {
        let z = d.estimate.value / d.estimate.stderr;
        ok &= z.abs() <= CRITICAL_DRIFT_Z;
        parts.push(format!("N={}: slope {:.3}+-{:.3} (z={:.2}, {} blow-ups)", r.n, d.estimate.value, d.estimate.stderr, z, r.blowups));
    }
    CriterionResult::judged(2, name, ok, parts.join("; "))
}

/// QV slope of synthetic squared Bessel paths of the given dimension,
/// sampled every `interval` up to `horizon`.
pub fn synthetic_qv_slope(dimension: f64, horizon: f64, interval: f64, paths: usize, seed: u64) -> f64 {
    let dt = (interval / 100.0).min(1e-4);
    let stride = (interval / dt).round() as usize;
    let cfg = BesselConfig { dimension, z0: dimension.max(1.0), horizon, dt, absorb_at_zero: false };
    let series: Vec<RSeries> = (0..paths)
        .map(|i| simulate_bessel_strided(&cfg, stride, &mut ReplicaSeed::derive(seed, 0, i as u64).dynamics_rng()).unwrap())
        .collect();
    bessel_qv_test(&series, Some(dimension)).map(|e| e.slope).unwrap_or(f64::NAN)
}

pub fn quadratic_variation(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "quadratic variation";
    let rows: Vec<_> = reports.iter().filter_map(|r| r.quadratic_variation.map(|q| (r, q))).collect();
    if rows.is_empty() {
        return CriterionResult::not_applicable(3, name, "no run with quadratic variation estimates");
    }
    let inside = |s: f64| s >= QV_RANGE.0 && s <= QV_RANGE.1;
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, q) in rows {
        let d = bessel_drift_target(r.theta, r.n);
        let synth = synthetic_qv_slope(d, r.horizon, r.snapshot_interval, 100, 17);
        ok &= inside(q.value) && inside(synth);
        parts.push(format!("theta={} N={}: particles {:.3}, synthetic d={d} {:.3}", r.theta, r.n, q.value, synth));
    }
    CriterionResult::judged(3, name, ok, parts.join("; "))
}

/// Smallest `k >= 3` with `2 (k-1)(N-k) < 2N`, by direct scan.
fn k2_by_scan(n: u64) -> Option<u64> {
    (3..=n).find(|&k| 2 * (k as i128 - 1) * (n as i128 - k as i128) < 2 * n as i128)
}

pub fn dimension_combinatorics(max_n: u64) -> CriterionResult {
    let name = "dimension combinatorics";
    let mut bad = Vec::new();
    for n in 5..=max_n {
        let k2 = critical_k2(n);
        if k2 != k2_by_scan(n) || !matches!(k2, Some(k) if k == n - 2 || k == n - 1) {
            bad.push(format!("N={n}: k2={k2:?}"));
        }
        for k in 1..=n {
            let (a, b) = (critical_dimension_times_n(n, k), critical_dimension_times_n(n, n + 1 - k));
            if a != b || a != 2 * (k as i128 - 1) * (n as i128 - k as i128) {
                bad.push(format!("N={n} k={k}: {a} vs {b}"));
            }
        }
        if bad.len() > 10 {
            break;
        }
    }
    let detail = if bad.is_empty() { format!("N in [5, {max_n}]: k2 in {{N-2, N-1}}, reflection exact") } else { bad.join("; ") };
    CriterionResult::judged(4, name, bad.is_empty(), detail)
}

fn log_uniform_edge<R: Rng>(rng: &mut R) -> Point2 {
    let r = 10f64.powf(rng.random_range(-3.0..3.0));
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Point2::new(r * a.cos(), r * a.sin())
}

pub fn barycentre_inequality(triples: usize, seed: u64) -> CriterionResult {
    let name = "barycentre inequality";
    let (p1, p2) = (PowerWeight { p: 1.0 }, PowerWeight { p: 2.0 });
    let log = LogKernelWeight;
    let pairs: [(&dyn RadialWeight, &dyn RadialWeight); 4] = [(&p1, &p1), (&p2, &p2), (&p1, &log), (&log, &log)];
    let mut rng = rng_from_u64(seed);
    let mut violations = 0usize;
    let mut checked = 0usize;
    for _ in 0..triples {
        let (x, y) = (log_uniform_edge(&mut rng), log_uniform_edge(&mut rng));
        let z = -(x + y);
        if z.is_zero() {
            continue;
        }
        for (phi, psi) in pairs {
            let wsum = |w: &dyn RadialWeight| [x, y, z].iter().map(|v| w.eval(v.norm()) * v.norm()).sum::<f64>();
            let scale = wsum(phi) * wsum(psi);
            match barycentre_gap(x, y, z, phi, psi) {
                Ok(g) if g.lower_bound >= -1e-9 * scale && g.delta >= g.lower_bound - 1e-9 * scale => {}
                _ => violations += 1,
            }
            checked += 1;
        }
    }
    CriterionResult::judged(5, name, violations == 0, format!("{violations} violations in {checked} checks"))
}

pub fn moment_bound(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "two-particle moment bound";
    let mut groups: BTreeMap<(u64, u64), Vec<(usize, f64, f64)>> = BTreeMap::new();
    for r in reports {
        for m in &r.pair_moments {
            groups.entry((theta_key(r.theta), m.gamma.to_bits())).or_default().push((r.n, m.at_horizon.value, m.at_half_horizon.value));
        }
    }
    groups.retain(|_, v| v.len() >= 2);
    if groups.is_empty() {
        return CriterionResult::not_applicable(6, name, "no (theta, gamma) with pair moments at two or more N");
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for ((t, g), mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        let vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let spread = vals.iter().copied().fold(f64::MIN, f64::max) / vals.iter().copied().fold(f64::MAX, f64::min);
        let growth = rows.iter().map(|r| r.1 / r.2).fold(f64::MIN, f64::max);
        ok &= spread <= MOMENT_SPREAD_MAX && growth <= MOMENT_GROWTH_MAX;
        let cells: Vec<String> = rows.iter().map(|r| format!("N={}:{:.4}", r.0, r.1)).collect();
        parts.push(format!(
            "theta={} gamma={}: {} spread {:.3}, growth {:.3}",
            f64::from_bits(t),
            f64::from_bits(g),
            cells.join(","),
            spread,
            growth
        ));
    }
    CriterionResult::judged(6, name, ok, parts.join("; "))
}

pub fn phase_classification(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "phase classification";
    let mut parts = Vec::new();
    let mut ok = true;
    for r in reports.iter().filter(|r| r.theta != 2.0) {
        let Some(d) = r.detectors.iter().filter(|d| d.k == 3).max_by(|a, b| a.ell.total_cmp(&b.ell)) else {
            continue;
        };
        let fired = d.fired as f64 / d.replicas as f64;
        let (frac, what) = if r.theta > 2.0 { (fired, "collapsed") } else { (1.0 - fired, "no collapse") };
        ok &= frac >= PHASE_FRACTION;
        parts.push(format!("theta={} N={} T={}: {what} in {:.1}%", r.theta, r.n, r.horizon, 100.0 * frac));
    }
    if parts.is_empty() {
        return CriterionResult::not_applicable(7, name, "no sub- or supercritical run with a k=3 detector");
    }
    CriterionResult::judged(7, name, ok, parts.join("; "))
}

pub fn explosion_divergence(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "critical explosion-time divergence";
    let groups: Vec<ExplosionGroup> = reports
        .iter()
        .filter(|r| r.theta == 2.0)
        .filter_map(|r| {
            let k3: Vec<_> = r.detectors.iter().filter(|d| d.k == 3).collect();
            let d = k3.iter().find(|d| d.ell == r.n as f64).or_else(|| k3.iter().max_by(|a, b| a.ell.total_cmp(&b.ell)))?;
            Some(ExplosionGroup { n: r.n, ell: d.ell, times: d.times.clone() })
        })
        .collect();
    let mut ns: Vec<usize> = groups.iter().map(|g| g.n).collect();
    ns.sort();
    ns.dedup();
    if ns.len() < 2 || ns.len() != groups.len() {
        return CriterionResult::not_applicable(8, name, "need critical runs at two or more distinct N");
    }
    let violating = reports.iter().any(|r| r.theta == 2.0 && r.hypothesis_violating);
    match explosion_time_summary(&groups, violating) {
        Ok(s) => {
            let ok = s.medians_strictly_increasing() && s.all_significant(EXPLOSION_ALPHA);
            let rows: Vec<String> = s.rows.iter().map(|r| format!("N={} ell={} median {:.4} fired {}/{}", r.n, r.ell, r.median, r.fired, r.replicas)).collect();
            let tests: Vec<String> = s.tests.iter().map(|t| format!("p({}<{})={:.3}", t.n_lo, t.n_hi, t.p_value)).collect();
            CriterionResult::judged(8, name, ok, format!("{}; {}", rows.join("; "), tests.join(", ")))
        }
        Err(e) => CriterionResult::judged(8, name, false, e.to_string()),
    }
}

pub fn residual_scaling(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "weak residual scaling";
    let mut groups: BTreeMap<u64, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for r in reports {
        if let Some(res) = &r.residual {
            groups.entry(theta_key(r.theta)).or_default().push((r.n, res.rms_at_horizon.value, res.constant_max_abs));
        }
    }
    groups.retain(|_, v| v.len() >= 2);
    if groups.is_empty() {
        return CriterionResult::not_applicable(9, name, "no theta with residuals at two or more N");
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (t, mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        let (lo, hi) = (rows[0], rows[rows.len() - 1]);
        let ratio = hi.1 / lo.1;
        let allowed = RESIDUAL_SLACK * (lo.0 as f64 / hi.0 as f64).sqrt();
        let constant = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        ok &= ratio <= allowed && constant == 0.0;
        parts.push(format!(
            "theta={}: rms N={} {:.4}, N={} {:.4}, ratio {:.3} (max {:.3}), constant residual {}",
            f64::from_bits(t),
            lo.0,
            lo.1,
            hi.0,
            hi.1,
            ratio,
            allowed,
            constant
        ));
    }
    CriterionResult::judged(9, name, ok, parts.join("; "))
}

pub fn bessel_dichotomy(replicas: usize, seed: u64) -> CriterionResult {
    let name = "Bessel oracle dichotomy";
    let frac = |d: f64| {
        let cfg = BesselConfig { dimension: d, z0: 1.0, horizon: 5.0, dt: 1e-4, absorb_at_zero: true };
        zero_hitting_fraction(&cfg, replicas, seed, d.to_bits()).map(|h| h.fraction)
    };
    match (frac(3.0), frac(1.0)) {
        (Ok(f3), Ok(f1)) => CriterionResult::judged(
            10,
            name,
            f3 <= 0.02 && f1 >= 0.50,
            format!("hit fraction d=3: {:.1}%, d=1: {:.1}%", 100.0 * f3, 100.0 * f1),
        ),
        (Err(e), _) | (_, Err(e)) => CriterionResult::judged(10, name, false, e.to_string()),
    }
}

pub fn centroid_conservation(reports: &[&DiagnosticsReport]) -> CriterionResult {
    let name = "centroid conservation";
    let rows: Vec<_> = reports.iter().filter(|r| r.replicas >= CENTROID_MIN_REPLICAS).filter_map(|r| r.centroid_msd.map(|c| (r, c))).collect();
    if rows.is_empty() {
        return CriterionResult::not_applicable(11, name, &format!("no run with centroid estimates and >= {CENTROID_MIN_REPLICAS} replicas"));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, c) in rows {
        let rel = c.estimate.value / c.target - 1.0;
        ok &= rel.abs() <= CENTROID_REL_TOL;
        parts.push(format!("theta={} N={}: msd {:.5} vs {:.5} ({:+.1}%)", r.theta, r.n, c.estimate.value, c.target, 100.0 * rel));
    }
    CriterionResult::judged(11, name, ok, parts.join("; "))
}

/// `evidence`: one `(description, identical)` entry per repeated run.
pub fn determinism(evidence: &[(String, bool)]) -> CriterionResult {
    let name = "determinism";
    if evidence.is_empty() {
        return CriterionResult::not_applicable(12, name, "no repeated runs");
    }
    let ok = evidence.iter().all(|e| e.1);
    let parts: Vec<String> = evidence.iter().map(|(d, same)| format!("{d}: {}", if *same { "identical" } else { "DIFFERENT" })).collect();
    CriterionResult::judged(12, name, ok, parts.join("; "))
}
