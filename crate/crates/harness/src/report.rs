//! Per-run diagnostics report and its time series.

use kslab::diagnostics::{
    bessel_drift_target, bessel_qv_test, bessel_drift_test, global_dispersion_path, integrate_g, pair_moment_integral,
    g_functional_monitor, variance_drift_target, variance_drift_test, DriftEstimate, RSeries, MIN_DRIFT_REPLICAS,
};
use kslab::dynamics::{centroid, first_collapse_time, TrajectoryRecord};
use kslab::empirical_measure::{
    diffuseness_monitor, holder_modulus, measure_path, weak_solution_residual, Constant, EmpiricalMeasure,
    TestFunctionFamily, WindowedWave, DEFAULT_N_TERMS,
};
use kslab::geometry::{ExtendedReal, Point2};
use kslab::seeding::ReplicaSeed;
use kslab::stats::{mean, median, quantile, std_err};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::HarnessError;

/// A scalar estimate with its standard error, sample size and time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub window: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64], window: f64) -> Self {
        let stderr = if xs.len() > 1 { std_err(xs) } else { 0.0 };
        Estimate { value: mean(xs), stderr, n: xs.len(), window }
    }

    fn nonempty(xs: &[f64], window: f64) -> Option<Self> {
        (!xs.is_empty()).then(|| Estimate::from_samples(xs, window))
    }

    fn from_drift(d: &DriftEstimate) -> Self {
        Estimate { value: d.slope, stderr: d.stderr, n: d.n_samples, window: d.window }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targeted {
    pub estimate: Estimate,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub k: usize,
    pub ell: f64,
    pub replicas: usize,
    pub fired: usize,
    /// `None` when at least half the replicas never fired.
    pub median: Option<f64>,
    pub times: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub gamma: f64,
    pub at_horizon: Estimate,
    pub at_half_horizon: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub test_function: WindowedWave,
    /// Root mean square over replicas alive at the horizon.
    pub rms_at_horizon: Estimate,
    /// Largest `|residual|` for a constant test function, over all replicas.
    pub constant_max_abs: f64,
    pub coarse_replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GReport {
    /// Replicas whose time integral stayed finite.
    pub finite_replicas: usize,
    pub integral: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub name: String,
    pub theta: f64,
    pub n: usize,
    pub replicas: usize,
    pub horizon: f64,
    pub snapshot_interval: f64,
    pub blowups: usize,
    pub hypothesis_violating: bool,
    pub detectors: Vec<DetectorSummary>,
    pub dispersion_drift: Option<Targeted>,
    pub variance_drift: Option<Targeted>,
    pub quadratic_variation: Option<Estimate>,
    pub pair_moments: Vec<MomentRow>,
    pub residual: Option<ResidualReport>,
    pub centroid_msd: Option<Targeted>,
    pub g_functional: Option<GReport>,
    /// Mean fraction of close pairs at the last alive snapshot.
    pub diffuseness: Option<Estimate>,
    pub holder_modulus: Option<Estimate>,
    /// Diagnostics skipped for lack of data, with the reason.
    pub skipped: Vec<String>,
}

/// A named time series written as `t,<columns...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// The bump used by the residual diagnostic.
pub fn residual_test_function() -> WindowedWave {
    WindowedWave::gaussian_bump(Point2::ZERO, 1.0, 1.0)
}

fn detector_summaries(cfg: &RunConfig, records: &[TrajectoryRecord]) -> Vec<DetectorSummary> {
    cfg.sim
        .detectors
        .iter()
        .map(|d| {
            let times: Vec<Option<f64>> = records.iter().map(|r| first_collapse_time(r, d.k, d.ell)).collect();
            let v: Vec<f64> = times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
            let m = median(&v);
            DetectorSummary {
                k: d.k,
                ell: d.ell,
                replicas: times.len(),
                fired: times.iter().filter(|t| t.is_some()).count(),
                median: m.is_finite().then_some(m),
                times,
            }
        })
        .collect()
}

fn dispersion_series(paths: &[RSeries]) -> Series {
    let grid = &paths[0].times;
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let alive: Vec<f64> = paths.iter().filter(|p| p.blowup.is_none_or(|b| t < b)).map(|p| p.values[k]).collect();
            let m = if alive.is_empty() { f64::NAN } else { mean(&alive) };
            (t, vec![m, alive.len() as f64])
        })
        .collect();
    Series { name: "dispersion".into(), columns: vec!["mean_r".into(), "alive".into()], rows }
}

/// Computes every selected diagnostic. Deterministic in its inputs.
pub fn compute_report(cfg: &RunConfig, records: &[TrajectoryRecord]) -> Result<(DiagnosticsReport, Vec<Series>), HarnessError> {
    let sim = &cfg.sim;
    let sel = &cfg.diagnostics;
    let nr = records.len();
    let mut skipped = Vec::new();
    let mut series = Vec::new();

    let paths: Vec<RSeries> = records.iter().map(global_dispersion_path).collect();
    if !paths.is_empty() && paths.iter().all(|p| p.times == paths[0].times) {
        series.push(dispersion_series(&paths));
    }

    let (mut dispersion_drift, mut variance_drift) = (None, None);
    if sel.drift {
        if nr >= MIN_DRIFT_REPLICAS {
            match bessel_drift_test(&paths) {
                Ok(d) => dispersion_drift = Some(Targeted { estimate: Estimate::from_drift(&d), target: bessel_drift_target(sim.theta, sim.n) }),
                Err(e) => skipped.push(format!("drift: {e}")),
            }
            match variance_drift_test(&paths, sim.n) {
                Ok(v) => variance_drift = Some(Targeted { estimate: Estimate::from_drift(&v), target: variance_drift_target(sim.theta, sim.n) }),
                Err(e) => skipped.push(format!("variance drift: {e}")),
            }
        } else {
            skipped.push(format!("drift: {nr} replicas, need {MIN_DRIFT_REPLICAS}"));
        }
    }

    let mut quadratic_variation = None;
    if sel.quadratic_variation {
        match bessel_qv_test(&paths, Some(bessel_drift_target(sim.theta, sim.n))) {
            Ok(q) => quadratic_variation = Some(Estimate::from_drift(&q)),
            Err(e) => skipped.push(format!("quadratic_variation: {e}")),
        }
    }

    let mut pair_moments = Vec::new();
    for &gamma in &sel.pair_moments {
        let at = |h: f64| {
            pair_moment_integral(records, gamma, h)
                .map(|m| Estimate { value: m.value, stderr: m.stderr, n: m.replicas, window: h })
                .map_err(|e| HarnessError::Runtime(format!("pair moments: {e}")))
        };
        pair_moments.push(MomentRow { gamma, at_horizon: at(sim.horizon)?, at_half_horizon: at(0.5 * sim.horizon)? });
    }

    let mut residual = None;
    if sel.residual {
        let phi = residual_test_function();
        let mut sq = Vec::new();
        let mut constant_max_abs: f64 = 0.0;
        let mut coarse_replicas = 0;
        let mut sum_sq: Vec<(f64, f64, usize)> = Vec::new();
        for r in records.iter().filter(|r| r.snapshots.first().is_some_and(|s| s.alive)) {
            let res = weak_solution_residual(r, &phi, None).map_err(|e| HarnessError::Runtime(format!("residual: {e}")))?;
            let c = weak_solution_residual(r, &Constant(1.0), None).map_err(|e| HarnessError::Runtime(format!("residual: {e}")))?;
            constant_max_abs = c.values.iter().fold(constant_max_abs, |m, v| m.max(v.abs()));
            coarse_replicas += res.coarse as usize;
            for (i, (&t, &v)) in res.times.iter().zip(&res.values).enumerate() {
                if i == sum_sq.len() {
                    sum_sq.push((t, 0.0, 0));
                }
                sum_sq[i].1 += v * v;
                sum_sq[i].2 += 1;
            }
            if r.blowup_time.is_none() {
                sq.push(res.last().powi(2));
            }
        }
        series.push(Series {
            name: "residual".into(),
            columns: vec!["rms".into(), "replicas".into()],
            rows: sum_sq.iter().map(|&(t, s, c)| (t, vec![(s / c as f64).sqrt(), c as f64])).collect(),
        });
        if sq.is_empty() {
            skipped.push("residual: no replica reached the horizon".into());
        } else {
            let ms = Estimate::from_samples(&sq, sim.horizon);
            let rms = ms.value.sqrt();
            let stderr = if rms > 0.0 { ms.stderr / (2.0 * rms) } else { 0.0 };
            let rms_at_horizon = Estimate { value: rms, stderr, n: ms.n, window: sim.horizon };
            residual = Some(ResidualReport { test_function: phi, rms_at_horizon, constant_max_abs, coarse_replicas });
        }
    }

    let mut centroid_msd = None;
    if sel.centroid {
        let d: Vec<f64> = records
            .iter()
            .filter(|r| r.blowup_time.is_none())
            .map(|r| {
                let (a, b) = (&r.snapshots[0], r.snapshots.last().unwrap());
                (centroid(&b.positions) - centroid(&a.positions)).norm_sq()
            })
            .collect();
        if d.len() >= 2 {
            centroid_msd = Some(Targeted { estimate: Estimate::from_samples(&d, sim.horizon), target: 2.0 * sim.horizon / sim.n as f64 });
        } else {
            skipped.push("centroid: fewer than 2 replicas reached the horizon".into());
        }
    }

    let mut g_functional = None;
    if sel.g_functional {
        let mut finite = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let mut rng = ReplicaSeed::derive(sim.master_seed, cfg.cell, i as u64).stream(2);
            let s = g_functional_monitor(r, sel.g_triple_budget, &mut rng).map_err(|e| HarnessError::Runtime(format!("g functional: {e}")))?;
            if let ExtendedReal::Finite(v) = integrate_g(&s) {
                finite.push(v);
            }
        }
        g_functional = Some(GReport { finite_replicas: finite.len(), integral: Estimate::nonempty(&finite, sim.horizon) });
    }

    let mut diffuseness = None;
    if sel.diffuseness {
        let f: Vec<f64> = records
            .iter()
            .filter_map(|r| r.snapshots.iter().rev().find(|s| s.alive))
            .map(|s| diffuseness_monitor(&EmpiricalMeasure::new(s.positions.clone()).unwrap(), sel.collision_scale).map(|d| d.close_fraction))
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Runtime(format!("diffuseness: {e}")))?;
        diffuseness = Estimate::nonempty(&f, sim.horizon);
    }

    let mut holder = None;
    if let Some(a) = sel.holder_exponent {
        let fam = TestFunctionFamily::default();
        let m: Vec<f64> = records
            .iter()
            .map(measure_path)
            .filter(|p| p.len() >= 2)
            .map(|p| holder_modulus(&p, a, &fam, DEFAULT_N_TERMS))
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Runtime(format!("holder modulus: {e}")))?;
        holder = Estimate::nonempty(&m, sim.horizon);
    }

    let report = DiagnosticsReport {
        name: cfg.name.clone(),
        theta: sim.theta,
        n: sim.n,
        replicas: nr,
        horizon: sim.horizon,
        snapshot_interval: sim.snapshot_interval,
        blowups: records.iter().filter(|r| r.blowup_time.is_some()).count(),
        hypothesis_violating: sim.theta == 2.0 && sim.law.is_full_dirac(),
        detectors: detector_summaries(cfg, records),
        dispersion_drift,
        variance_drift,
        quadratic_variation,
        pair_moments,
        residual,
        centroid_msd,
        g_functional,
        diffuseness,
        holder_modulus: holder,
        skipped,
    };
    Ok((report, series))
}

/// Interquartile summary of finite-or-infinite times, for tables.
pub fn time_quartiles(times: &[Option<f64>]) -> (f64, f64, f64) {
    let v: Vec<f64> = times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
    (quantile(&v, 0.25), median(&v), quantile(&v, 0.75))
}
