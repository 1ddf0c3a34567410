use kslab::config::{DriftKernel, SimConfig, StepPolicy};
use kslab::dynamics::*;
use kslab::geometry::Point2;
use kslab::initializers::{sample_initial, InitialLaw};
use kslab::seeding::{rng_from_u64, ReplicaSeed};
use statrs::distribution::{ContinuousCDF, Normal};

fn kolmogorov_smirnov_normal(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let norm = Normal::standard();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = norm.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn drift_sums_to_zero() {
    let mut rng = rng_from_u64(1);
    let x = sample_initial(&InitialLaw::gaussian(1.0), 200, &mut rng).unwrap();
    let b = total_drift(&x, 2.5);
    let s = b.iter().fold(Point2::ZERO, |a, &v| a + v);
    let scale: f64 = b.iter().map(|v| v.norm()).sum();
    assert!(s.norm() <= 1e-14 * scale, "{s}");
}

#[test]
fn zero_theta_increments_are_gaussian() {
    let x0 = sample_initial(&InitialLaw::gaussian(1.0), 10, &mut rng_from_u64(2)).unwrap();
    let mut state = ParticleState::new(x0);
    let policy = StepPolicy { dt_max: 0.01, ..StepPolicy::default() };
    let mut noise = GaussianNoise(rng_from_u64(3));
    let mut z = Vec::new();
    for _ in 0..500 {
        let before = state.positions.clone();
        let (info, events) = step(&mut state, &policy, 0.0, &mut noise).unwrap();
        assert_eq!(info.dt, 0.01);
        assert!(events.is_empty());
        for (a, b) in before.iter().zip(&state.positions) {
            let d = (*b - *a) / info.dt.sqrt();
            z.push(d.x);
            z.push(d.y);
        }
    }
    // 10^4 draws; 1% critical value of the KS statistic is 1.63 / sqrt(n).
    let d = kolmogorov_smirnov_normal(z.clone());
    assert!(d < 1.63 / (z.len() as f64).sqrt(), "KS = {d}");
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    assert!(mean.abs() < 5.0 / (z.len() as f64).sqrt());
}

#[test]
fn mirrored_start_and_noise_give_mirrored_path() {
    let cfg = SimConfig::new(1.5, 12, 0.5, InitialLaw::gaussian(1.0)).with_detector(3, 1e6);
    let x0 = sample_initial(&cfg.law, cfg.n, &mut rng_from_u64(4)).unwrap();
    let m0: Vec<Point2> = x0.iter().map(|p| p.mirror_x()).collect();
    let a = simulate_from(&cfg, x0, &mut GaussianNoise(rng_from_u64(5)), &mut []).unwrap();
    let b = simulate_from(&cfg, m0, &mut MirroredNoise(GaussianNoise(rng_from_u64(5))), &mut []).unwrap();
    assert_eq!(a.steps, b.steps);
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(sa.t, sb.t);
        for (p, q) in sa.positions.iter().zip(&sb.positions) {
            assert_eq!(p.mirror_x(), *q);
        }
    }
}

#[test]
fn one_step_mean_displacement_matches_drift() {
    let x0 = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.2),
        Point2::new(-0.7, 0.9),
        Point2::new(0.3, -1.1),
        Point2::new(-1.2, -0.4),
    ];
    let theta = 1.0;
    let b = total_drift(&x0, theta);
    let policy = StepPolicy { dt_max: 1e-3, ..StepPolicy::default() };
    let reps = 10_000;
    let mut noise = GaussianNoise(rng_from_u64(6));
    let mut sum = vec![Point2::ZERO; x0.len()];
    let mut dt = 0.0;
    for _ in 0..reps {
        let mut s = ParticleState::new(x0.clone());
        let (info, _) = step(&mut s, &policy, theta, &mut noise).unwrap();
        dt = info.dt;
        for (acc, (p, q)) in sum.iter_mut().zip(s.positions.iter().zip(&x0)) {
            *acc += *p - *q;
        }
    }
    // The mean of N(b dt, dt) over `reps` draws has standard error sqrt(dt / reps).
    let se = (dt / reps as f64).sqrt();
    for (i, s) in sum.iter().enumerate() {
        let m = *s / reps as f64;
        let err = m - b[i] * dt;
        assert!(err.x.abs() < 5.0 * se && err.y.abs() < 5.0 * se, "particle {i}: {err}");
    }
    assert!((b[0] * dt).norm() > 0.0);
}

#[test]
fn zero_horizon_gives_initial_snapshot_only() {
    let cfg = SimConfig::new(1.0, 8, 0.0, InitialLaw::gaussian(1.0));
    let seed = ReplicaSeed::derive(0, 0, 0);
    let rec = simulate(&cfg, &cfg.law, &seed, &mut []).unwrap();
    assert_eq!(rec.snapshots.len(), 1);
    assert_eq!(rec.steps, 0);
    assert_eq!(rec.snapshots[0].positions, sample_initial(&cfg.law, 8, &mut seed.initial_rng()).unwrap());
}

#[test]
fn snapshots_land_on_grid() {
    let mut cfg = SimConfig::new(1.0, 8, 1.0, InitialLaw::gaussian(1.0));
    cfg.snapshot_interval = 0.1;
    let rec = simulate(&cfg, &cfg.law, &ReplicaSeed::derive(0, 0, 1), &mut []).unwrap();
    assert_eq!(rec.snapshots.len(), 11);
    for (k, s) in rec.snapshots.iter().enumerate() {
        assert!((s.t - 0.1 * k as f64).abs() < 1e-12);
    }
    assert_eq!(rec.snapshots.last().unwrap().t, 1.0);
}

#[test]
fn runs_are_bitwise_reproducible_for_both_kernels() {
    for kernel in [DriftKernel::Symmetric, DriftKernel::Parallel] {
        let mut cfg = SimConfig::new(2.0, 16, 0.5, InitialLaw::two_atoms(1.0)).with_detector(3, 1e6).with_detector(2, 1e4);
        cfg.drift_kernel = kernel;
        let seed = ReplicaSeed::derive(9, 1, 2);
        let a = simulate(&cfg, &cfg.law, &seed, &mut []).unwrap();
        let b = simulate(&cfg, &cfg.law, &seed, &mut []).unwrap();
        assert_eq!(a, b);
        assert!(a.steps > 0);
    }
}

#[test]
fn observers_see_every_accepted_step() {
    let cfg = SimConfig::new(1.0, 8, 0.2, InitialLaw::gaussian(1.0));
    let mut calls = 0u64;
    let mut last_t = -1.0;
    let mut monotone = true;
    let mut obs = |s: &ParticleState, _dt: f64, _e: &[Event]| {
        calls += 1;
        monotone &= s.t >= last_t;
        last_t = s.t;
    };
    let rec = simulate(&cfg, &cfg.law, &ReplicaSeed::derive(0, 0, 3), &mut [&mut obs]).unwrap();
    assert_eq!(calls, rec.steps + 1);
    assert!(monotone);
}

#[test]
fn collapse_events_contain_a_close_pair_and_coarser_thresholds_fire_first() {
    let mut seen = 0;
    for i in 0..20 {
        let cfg = SimConfig::new(3.0, 10, 20.0, InitialLaw::gaussian(1.0))
            .with_detector(3, 10.0)
            .with_detector(3, 100.0)
            .with_detector(3, 1e6)
            .with_detector(4, 1e3);
        let rec = simulate(&cfg, &cfg.law, &ReplicaSeed::derive(3, 0, i), &mut []).unwrap();
        let (Some(t10), Some(t100)) = (first_collapse_time(&rec, 3, 10.0), first_collapse_time(&rec, 3, 100.0)) else {
            continue;
        };
        assert!(t10 <= t100);
        seen += 1;
        let last = rec.snapshots.iter().rev().find(|s| !s.alive).map(|s| s.positions.clone());
        for e in rec.events.iter().filter(|e| e.kind == EventKind::ClusterCollapse) {
            let EventPayload::Cluster { indices, ell, dispersion, .. } = &e.payload else { panic!() };
            assert!(*dispersion <= 1.0 / ell);
            // Verify against the frozen configuration for the blow-up event.
            if Some(e.t) == rec.blowup_time {
                let x = last.as_ref().unwrap();
                let mut closest = f64::INFINITY;
                for a in indices {
                    for b in indices {
                        if a < b {
                            closest = closest.min((x[*a] - x[*b]).norm());
                        }
                    }
                }
                assert!(closest <= (2.0 / ell).sqrt());
            }
        }
    }
    assert!(seen >= 15);
}

#[test]
fn supercritical_blowup_freezes_positions() {
    let cfg = SimConfig::new(3.0, 10, 20.0, InitialLaw::gaussian(1.0)).with_detector(3, 1e6);
    let rec = simulate(&cfg, &cfg.law, &ReplicaSeed::derive(1, 0, 0), &mut []).unwrap();
    let tau = rec.blowup_time.expect("theta = 3, N = 10 is supercritical");
    let frozen: Vec<_> = rec.snapshots.iter().filter(|s| !s.alive).collect();
    assert!(!frozen.is_empty());
    assert!(frozen.iter().all(|s| s.t >= tau && s.positions == frozen[0].positions));
    assert_eq!(rec.snapshots.last().unwrap().t, 20.0);
}

#[test]
fn halving_dt_max_is_consistent_without_taming() {
    // Matched Brownian paths: the coarse run sums pairs of fine increments.
    struct Paired {
        fine: Vec<Vec<Point2>>,
        idx: usize,
    }
    impl NoiseSource for Paired {
        fn fill(&mut self, out: &mut [Point2]) {
            // Extra rounding steps draw zeros; those runs are discarded below.
            match self.fine.get(self.idx) {
                Some(v) => out.copy_from_slice(v),
                None => out.fill(Point2::ZERO),
            }
            self.idx += 1;
        }
    }
    let n = 8;
    let theta = 0.5;
    let horizon: f64 = 0.5;
    let mut rms = Vec::new();
    for dt_max in [4e-3f64, 2e-3, 1e-3] {
        let mut sq = 0.0;
        let mut used = 0;
        let reps = 20;
        for r in 0..reps {
            let x0 = sample_initial(&InitialLaw::gaussian(1.0), n, &mut rng_from_u64(100 + r)).unwrap();
            // Fixed-step runs (proximity gain large, so only dt_max binds away
            // from near-collisions); fine path uses dt_max / 2.
            let steps = (horizon / (dt_max / 2.0)).round() as usize;
            let mut g = GaussianNoise(rng_from_u64(200 + r));
            let fine: Vec<Vec<Point2>> = (0..steps)
                .map(|_| {
                    let mut v = vec![Point2::ZERO; n];
                    g.fill(&mut v);
                    v
                })
                .collect();
            let coarse: Vec<Vec<Point2>> = fine
                .chunks(2)
                .map(|c| c[0].iter().zip(&c[1]).map(|(a, b)| (*a + *b) / 2f64.sqrt()).collect())
                .collect();
            let run = |dt: f64, noise: Vec<Vec<Point2>>| {
                let mut cfg = SimConfig::new(theta, n, horizon, InitialLaw::gaussian(1.0));
                cfg.snapshot_interval = horizon;
                cfg.step = StepPolicy { dt_max: dt, proximity_gain: 1e9, taming_cap: 0.99, ..StepPolicy::default() };
                let mut src = Paired { fine: noise, idx: 0 };
                simulate_from(&cfg, x0.clone(), &mut src, &mut [])
            };
            let (Ok(a), Ok(b)) = (run(dt_max, coarse.clone()), run(dt_max / 2.0, fine.clone())) else { continue };
            let fixed = |r: &TrajectoryRecord, k: usize| r.steps as usize == k && !r.events.iter().any(|e| e.kind == EventKind::TamingActivated);
            if !fixed(&a, steps / 2) || !fixed(&b, steps) {
                continue;
            }
            let pa = &a.snapshots.last().unwrap().positions;
            let pb = &b.snapshots.last().unwrap().positions;
            used += 1;
            sq += pa.iter().zip(pb).map(|(p, q)| (*p - *q).norm_sq()).sum::<f64>() / n as f64;
        }
        assert!(used >= 10, "only {used} fixed-step pairs");
        rms.push((sq / used as f64).sqrt());
    }
    // Strong order >= 1/2: errors shrink as dt_max halves.
    assert!(rms[2] < rms[0], "{rms:?}");
    assert!(rms[2] < 0.1, "{rms:?}");
}
