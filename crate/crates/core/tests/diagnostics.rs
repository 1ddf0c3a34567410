use kslab::bessel::{simulate_bessel_strided, BesselConfig};
use kslab::config::SimConfig;
use kslab::diagnostics::*;
use kslab::dynamics::{simulate, Snapshot, TrajectoryRecord};
use kslab::geometry::{ExtendedReal, Point2};
use kslab::initializers::InitialLaw;
use kslab::seeding::{rng_from_u64, ReplicaSeed};

fn besq_paths(d: f64, z0: f64, reps: u64, seed: u64) -> Vec<RSeries> {
    let cfg = BesselConfig { dimension: d, z0, horizon: 1.0, dt: 1e-4, absorb_at_zero: false };
    (0..reps).map(|r| simulate_bessel_strided(&cfg, 100, &mut rng_from_u64(seed * 1000 + r)).unwrap()).collect()
}

#[test]
fn drift_recovered_from_synthetic_besq() {
    for (i, d) in [0.0, 1.0, 2.8, 10.0].into_iter().enumerate() {
        let est = stopped_drift_slope(&besq_paths(d, 5.0, 400, i as u64)).unwrap();
        assert!(est.z_score(d).abs() < 3.0, "d = {d}: {est:?}");
        assert!(est.stderr > 0.0);
    }
}

#[test]
fn stopping_at_independent_times_keeps_the_drift() {
    let mut paths = besq_paths(4.0, 2.0, 400, 7);
    for (i, p) in paths.iter_mut().enumerate() {
        if i % 2 == 0 {
            p.blowup = Some(0.3 + 0.6 * (i as f64 / 400.0));
        }
    }
    let est = stopped_drift_slope(&paths).unwrap();
    assert!(est.z_score(4.0).abs() < 3.0, "{est:?}");
    assert!(est.window <= 1.0);
}

#[test]
fn drift_estimator_rejects_bad_input() {
    let few = besq_paths(1.0, 1.0, 5, 1);
    assert!(matches!(stopped_drift_slope(&few), Err(DiagnosticsError::InsufficientData(_))));
    let mut paths = besq_paths(1.0, 1.0, 30, 2);
    paths[3].times[1] += 1e-3;
    assert!(matches!(stopped_drift_slope(&paths), Err(DiagnosticsError::InconsistentGrid)));
}

#[test]
fn quadratic_variation_rate_is_one() {
    let cfg = BesselConfig { dimension: 3.0, z0: 4.0, horizon: 1.0, dt: 1e-5, absorb_at_zero: false };
    let paths: Vec<RSeries> = (0..40).map(|r| simulate_bessel_strided(&cfg, 10, &mut rng_from_u64(500 + r)).unwrap()).collect();
    let est = bessel_qv_test(&paths, Some(3.0)).unwrap();
    assert!(est.relative_error(1.0) < 0.05, "{est:?}");
    let free = bessel_qv_test(&paths, None).unwrap();
    assert!(free.relative_error(1.0) < 0.05, "{free:?}");
}

#[test]
fn variance_drift_of_free_particles() {
    let n = 10;
    let cfg = SimConfig::new(0.0, n, 1.0, InitialLaw::gaussian(1.0));
    let paths: Vec<RSeries> = (0..200)
        .map(|r| {
            let rec = simulate(&cfg, &cfg.law, &ReplicaSeed::derive(11, 0, r), &mut []).unwrap();
            global_dispersion_path(&rec)
        })
        .collect();
    let est = variance_drift_test(&paths, n).unwrap();
    let target = variance_drift_target(0.0, n);
    assert!((target - 1.8).abs() < 1e-15);
    assert!(est.z_score(target).abs() < 3.0, "{est:?}");
    let r = bessel_drift_test(&paths).unwrap();
    assert!(r.z_score(bessel_drift_target(0.0, n)).abs() < 3.0, "{r:?}");
}

fn static_record(theta: f64, positions: Vec<Point2>, times: &[f64], alive_until: usize) -> TrajectoryRecord {
    let snapshots = times
        .iter()
        .enumerate()
        .map(|(i, &t)| Snapshot { t, positions: positions.clone(), alive: i < alive_until })
        .collect();
    TrajectoryRecord { theta, n: positions.len(), snapshots, events: vec![], blowup_time: None, steps: 0 }
}

fn cloud(n: usize, scale: f64) -> Vec<Point2> {
    (0..n)
        .map(|i| {
            let a = i as f64 * 2.399963;
            let r = scale * ((i + 1) as f64 / n as f64).sqrt();
            Point2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

#[test]
fn static_cloud_integral_is_exact() {
    let x = cloud(12, 0.8);
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rec = static_record(0.5, x.clone(), &times, 5);
    for horizon in [1.0, 0.6, 0.1] {
        let m = pair_moment_integral(&[rec.clone()], 1.2, horizon).unwrap();
        let exact = horizon * pair_power_mean(&x, 1.2);
        assert!((m.value - exact).abs() < 1e-12 * exact, "T = {horizon}");
    }
}

#[test]
fn frozen_tail_is_excluded() {
    let x = cloud(12, 0.8);
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rec = static_record(0.5, x.clone(), &times, 3);
    let m = pair_moment_integral(&[rec], 1.2, 1.0).unwrap();
    let exact = 0.5 * pair_power_mean(&x, 1.2);
    assert!((m.value - exact).abs() < 1e-12 * exact);
}

#[test]
fn small_clouds_have_decreasing_moments_in_gamma() {
    let rec = static_record(0.5, cloud(15, 0.3), &[0.0, 0.5, 1.0], 3);
    let vals: Vec<f64> = [0.6, 0.9, 1.2, 1.5, 1.9].iter().map(|&g| pair_moment_integral(&[rec.clone()], g, 1.0).unwrap().value).collect();
    assert!(vals.windows(2).all(|w| w[0] > w[1]), "{vals:?}");
}

#[test]
fn gamma_range_enforced() {
    let rec = static_record(0.5, cloud(6, 1.0), &[0.0, 1.0], 2);
    for g in [0.5, 0.2, 2.0, 2.5] {
        assert!(matches!(pair_moment_integral(&[rec.clone()], g, 1.0), Err(DiagnosticsError::GammaOutOfRange { .. })));
    }
}

#[test]
fn dimension_table_has_critical_index() {
    let t = dimension_table(2.0, 20).unwrap();
    assert_eq!(t.get(1), None);
    assert_eq!(t.get(20), Some(0.0));
    assert!((t.get(2).unwrap() - 1.8).abs() < 1e-12);
    let k2 = t.k2.unwrap();
    assert_eq!(k2, critical_k2(20).unwrap() as usize);
    assert!(t.get(k2).unwrap() < 2.0 && t.get(k2 - 1).unwrap() >= 2.0);
    assert!(dimension_table(2.0, 4).is_err());
}

#[test]
fn g_monitor_flags_coincident_points() {
    let mut x = cloud(8, 1.0);
    let g = g_functional_at(0.0, &x, 10, &mut rng_from_u64(0));
    assert_eq!(g.triples, 56);
    assert_eq!(g.exceedances, 0);
    x[1] = x[0];
    let g = g_functional_at(0.0, &x, 10, &mut rng_from_u64(0));
    assert!(g.exceedances > 0);
    assert_eq!(g.mean, ExtendedReal::Infinite);
    let big = cloud(40, 1.0);
    let s = g_functional_at(0.0, &big, 500, &mut rng_from_u64(0));
    assert_eq!(s.triples, 500);
    let rec = static_record(3.0, cloud(8, 1.0), &[0.0, 0.5, 1.0], 3);
    let series = g_functional_monitor(&rec, 10, &mut rng_from_u64(0)).unwrap();
    let v = integrate_g(&series).finite().unwrap();
    assert!((v - series[0].finite_mean).abs() < 1e-12 * v.abs());
}

#[test]
fn explosion_summary_detects_growth() {
    let group = |n: usize, scale: f64| ExplosionGroup {
        n,
        ell: 1e6,
        times: (0..60).map(|i| if i == 59 { None } else { Some(scale * (1.0 + i as f64 / 60.0)) }).collect(),
    };
    let s = explosion_time_summary(&[group(32, 2.0), group(8, 0.5), group(128, 8.0)], false).unwrap();
    assert_eq!(s.rows.iter().map(|r| r.n).collect::<Vec<_>>(), [8, 32, 128]);
    assert!(s.medians_strictly_increasing());
    assert!(s.all_significant(0.01));
    assert_eq!(s.rows[0].fired, 59);
    let flat = explosion_time_summary(&[group(8, 1.0), group(32, 1.0)], false).unwrap();
    assert!(flat.medians_nondecreasing() && !flat.medians_strictly_increasing());
    assert!(!flat.all_significant(0.05));
    let short = ExplosionGroup { n: 8, ell: 1.0, times: vec![Some(1.0); 10] };
    assert!(explosion_time_summary(&[short], false).is_err());
}
