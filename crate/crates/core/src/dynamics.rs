//! Tamed adaptive Euler-Maruyama integration of the particle system with
//! cluster-collapse detection.
//!
//! Each accepted step evaluates the drift, the nearest-neighbour distances and
//! the close pairs in one O(N^2) pass, then
//!
//! * picks `dt = min(dt_max, c0 * dmin^p, cap * min_i nn_i / |b_i|)`, clipped
//!   so that snapshot times are hit exactly and floored at `substep_floor`;
//! * caps each drift displacement at `cap * nn_i` (taming), which only binds
//!   on floor-sized steps;
//! * adds independent `N(0, dt)` increments to every coordinate.
//!
//! Detectors are evaluated on every accepted state, including the initial
//! one. The run is declared blown up when the `k = 3` detector with the
//! largest `ell` fires; positions are then frozen until the horizon.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CollapseDetector, ConfigError, DriftKernel, SimConfig, StepPolicy};
use crate::geometry::{pair_kernel, Point2};
use crate::initializers::{sample_initial, InitError, InitialLaw};
use crate::seeding::ReplicaSeed;
use crate::stats::KahanSum;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("no progress at t = {t}: {streak} consecutive steps at the substep floor {floor:e}")]
    NoProgress { t: f64, streak: u64, floor: f64 },
    #[error("non-finite position for particle {particle} at t = {t}")]
    NonFinite { particle: usize, t: f64 },
    #[error("step called on a state that is no longer alive")]
    NotAlive,
    #[error("expected {expected} initial positions, got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Init(#[from] InitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub t: f64,
    pub positions: Vec<Point2>,
    pub alive: bool,
}

impl ParticleState {
    pub fn new(positions: Vec<Point2>) -> Self {
        ParticleState { t: 0.0, positions, alive: true }
    }

    pub fn centroid(&self) -> Point2 {
        centroid(&self.positions)
    }
}

pub fn centroid(positions: &[Point2]) -> Point2 {
    positions.iter().fold(Point2::ZERO, |a, &p| a + p) / positions.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ClusterCollapse,
    TamingActivated,
    SubstepFloorHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventPayload {
    Cluster {
        indices: Vec<usize>,
        k: usize,
        ell: f64,
        dispersion: f64,
        /// Size of the step that led to the detection (0 at `t = 0`).
        dt: f64,
    },
    Tamed {
        particles: usize,
        dt: f64,
    },
    Floor {
        dt: f64,
        streak: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<Point2>,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub theta: f64,
    pub n: usize,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
    /// Time at which the blow-up detector fired, if it did.
    pub blowup_time: Option<f64>,
    pub steps: u64,
}

impl TrajectoryRecord {
    /// Snapshots taken while the system was alive, plus the first frozen one.
    pub fn pre_blowup(&self) -> &[Snapshot] {
        match self.snapshots.iter().position(|s| !s.alive) {
            Some(i) => &self.snapshots[..=i],
            None => &self.snapshots,
        }
    }
}

/// Earliest collapse time logged for detector `(k, ell)`.
pub fn first_collapse_time(record: &TrajectoryRecord, k: usize, ell: f64) -> Option<f64> {
    record
        .events
        .iter()
        .filter(|e| e.kind == EventKind::ClusterCollapse)
        .filter_map(|e| match &e.payload {
            EventPayload::Cluster { k: ek, ell: el, .. } if *ek == k && *el == ell => Some(e.t),
            _ => None,
        })
        .reduce(f64::min)
}

/// Source of standard Gaussian pairs, one per particle per step.
pub trait NoiseSource {
    fn fill(&mut self, out: &mut [Point2]);
}

pub struct GaussianNoise<R>(pub R);

impl<R: Rng> NoiseSource for GaussianNoise<R> {
    fn fill(&mut self, out: &mut [Point2]) {
        for p in out.iter_mut() {
            p.x = self.0.sample(StandardNormal);
            p.y = self.0.sample(StandardNormal);
        }
    }
}

/// Reflects another source across the vertical axis.
pub struct MirroredNoise<S>(pub S);

impl<S: NoiseSource> NoiseSource for MirroredNoise<S> {
    fn fill(&mut self, out: &mut [Point2]) {
        self.0.fill(out);
        for p in out.iter_mut() {
            *p = p.mirror_x();
        }
    }
}

/// Called after every accepted step (and once on the initial state with
/// `dt = 0`).
pub trait Observer {
    fn observe(&mut self, state: &ParticleState, dt: f64, new_events: &[Event]);
}

impl<F: FnMut(&ParticleState, f64, &[Event])> Observer for F {
    fn observe(&mut self, state: &ParticleState, dt: f64, new_events: &[Event]) {
        self(state, dt, new_events)
    }
}

/// `b_i = (theta/N) sum_j K(x_i - x_j)`; each unordered pair is evaluated once.
pub fn total_drift(positions: &[Point2], theta: f64) -> Vec<Point2> {
    let mut pass = PairPass::new(positions.len());
    pass.run(positions, theta, DriftKernel::Symmetric, None);
    pass.drift
}

/// Output of one O(N^2) sweep.
#[derive(Debug, Clone, Default)]
pub struct PairPass {
    pub drift: Vec<Point2>,
    /// Squared distance to the nearest other particle.
    pub nn_sq: Vec<f64>,
    /// Pairs `(i, j)`, `i < j`, with squared distance at most the requested
    /// radius.
    pub close_pairs: Vec<(usize, usize)>,
    acc_x: Vec<KahanSum>,
    acc_y: Vec<KahanSum>,
}

impl PairPass {
    pub fn new(n: usize) -> Self {
        PairPass {
            drift: vec![Point2::ZERO; n],
            nn_sq: vec![f64::INFINITY; n],
            close_pairs: Vec::new(),
            acc_x: vec![KahanSum::new(); n],
            acc_y: vec![KahanSum::new(); n],
        }
    }

    pub fn min_distance_sq(&self) -> f64 {
        self.nn_sq.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn run(&mut self, x: &[Point2], theta: f64, kernel: DriftKernel, close_radius_sq: Option<f64>) {
        let n = x.len();
        self.close_pairs.clear();
        match kernel {
            DriftKernel::Symmetric => self.run_symmetric(x, close_radius_sq),
            DriftKernel::Parallel => self.run_parallel(x, close_radius_sq),
        }
        let scale = theta / n as f64;
        for i in 0..n {
            self.drift[i] = Point2::new(self.acc_x[i].value() * scale, self.acc_y[i].value() * scale);
        }
    }

    fn run_symmetric(&mut self, x: &[Point2], close: Option<f64>) {
        let n = x.len();
        self.acc_x.iter_mut().for_each(|a| *a = KahanSum::new());
        self.acc_y.iter_mut().for_each(|a| *a = KahanSum::new());
        self.nn_sq.iter_mut().for_each(|v| *v = f64::INFINITY);
        let close = close.unwrap_or(-1.0);
        for i in 0..n {
            let xi = x[i];
            let mut nn_i = self.nn_sq[i];
            for j in (i + 1)..n {
                let d = xi - x[j];
                let r2 = d.norm_sq();
                if r2 < nn_i {
                    nn_i = r2;
                }
                if r2 < self.nn_sq[j] {
                    self.nn_sq[j] = r2;
                }
                if r2 <= close {
                    self.close_pairs.push((i, j));
                }
                if r2 == 0.0 {
                    continue;
                }
                let kx = -d.x / r2;
                let ky = -d.y / r2;
                self.acc_x[i].add(kx);
                self.acc_y[i].add(ky);
                self.acc_x[j].add(-kx);
                self.acc_y[j].add(-ky);
            }
            self.nn_sq[i] = nn_i;
        }
    }

    fn run_parallel(&mut self, x: &[Point2], close: Option<f64>) {
        let n = x.len();
        let close = close.unwrap_or(-1.0);
        let rows: Vec<(KahanSum, KahanSum, f64, Vec<usize>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (mut ax, mut ay) = (KahanSum::new(), KahanSum::new());
                let mut nn = f64::INFINITY;
                let mut near = Vec::new();
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let k = pair_kernel(x[i] - x[j]);
                    let r2 = (x[i] - x[j]).norm_sq();
                    nn = nn.min(r2);
                    if j > i && r2 <= close {
                        near.push(j);
                    }
                    ax.add(k.x);
                    ay.add(k.y);
                }
                (ax, ay, nn, near)
            })
            .collect();
        for (i, (ax, ay, nn, near)) in rows.into_iter().enumerate() {
            self.acc_x[i] = ax;
            self.acc_y[i] = ay;
            self.nn_sq[i] = nn;
            self.close_pairs.extend(near.into_iter().map(|j| (i, j)));
        }
    }
}

/// First size-`k` cluster with dispersion `<= threshold`, searched among
/// cliques of the close-pair graph.
///
/// Every pair of a cluster with `R_K <= 1/ell` is within `sqrt(k/ell)` (from
/// `R_K = (1/k) sum_{i<j} |x_i - x_j|^2`), so the close-pair graph built with
/// that radius contains every candidate. The search extends clusters one
/// index at a time using `R_{K+j} = R_K + m/(m+1) |x_j - S_K|^2`, which is
/// monotone and allows pruning as soon as the threshold is exceeded.
pub fn find_collapsed_cluster(
    positions: &[Point2],
    close_pairs: &[(usize, usize)],
    k: usize,
    threshold: f64,
) -> Option<(Vec<usize>, f64)> {
    if k < 2 || k > positions.len() {
        return None;
    }
    let n = positions.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let radius_sq = k as f64 * threshold;
    for &(i, j) in close_pairs {
        if (positions[i] - positions[j]).norm_sq() <= radius_sq {
            adj[i].push(j);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut stack = Vec::with_capacity(k);
    for v in 0..n {
        if adj[v].len() + 1 < k {
            continue;
        }
        stack.clear();
        stack.push(v);
        if let Some(r) = extend(positions, &adj, &mut stack, &adj[v], positions[v], 0.0, k, threshold) {
            return Some((stack.clone(), r));
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn extend(
    x: &[Point2],
    adj: &[Vec<usize>],
    stack: &mut Vec<usize>,
    candidates: &[usize],
    mean: Point2,
    r: f64,
    k: usize,
    threshold: f64,
) -> Option<f64> {
    let m = stack.len();
    if m == k {
        return Some(r);
    }
    for (pos, &j) in candidates.iter().enumerate() {
        if candidates.len() - pos + m < k {
            break;
        }
        let mf = m as f64;
        let r_new = r + mf / (mf + 1.0) * (x[j] - mean).norm_sq();
        if r_new > threshold {
            continue;
        }
        let next: Vec<usize> = candidates[pos + 1..]
            .iter()
            .copied()
            .filter(|c| adj[j].binary_search(c).is_ok())
            .collect();
        stack.push(j);
        let mean_new = (mean * mf + x[j]) / (mf + 1.0);
        if let Some(found) = extend(x, adj, stack, &next, mean_new, r_new, k, threshold) {
            return Some(found);
        }
        stack.pop();
    }
    None
}

/// Result of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub tamed: usize,
    pub floor_hit: bool,
}

/// Stateful stepper reusing its buffers across steps.
pub struct Integrator {
    theta: f64,
    policy: StepPolicy,
    kernel: DriftKernel,
    pass: PairPass,
    noise_buf: Vec<Point2>,
    floor_streak: u64,
    /// Close-pair radius requested from the next pair pass.
    close_radius_sq: Option<f64>,
}

impl Integrator {
    pub fn new(n: usize, theta: f64, policy: StepPolicy, kernel: DriftKernel) -> Self {
        Integrator {
            theta,
            policy,
            kernel,
            pass: PairPass::new(n),
            noise_buf: vec![Point2::ZERO; n],
            floor_streak: 0,
            close_radius_sq: None,
        }
    }

    pub fn set_close_radius_sq(&mut self, r2: Option<f64>) {
        self.close_radius_sq = r2;
    }

    /// Runs the pair pass at the current positions.
    pub fn evaluate(&mut self, positions: &[Point2]) -> &PairPass {
        self.pass.run(positions, self.theta, self.kernel, self.close_radius_sq);
        &self.pass
    }

    pub fn pass(&self) -> &PairPass {
        &self.pass
    }

    /// Step size proposed by the policy from the last pair pass, before
    /// flooring and snapshot clipping.
    fn proposed_dt(&self) -> f64 {
        let mut dt = self.policy.dt_max;
        if self.theta == 0.0 {
            return dt;
        }
        let dmin_sq = self.pass.min_distance_sq();
        let prox = if self.policy.proximity_exponent == 2.0 {
            dmin_sq
        } else {
            dmin_sq.powf(0.5 * self.policy.proximity_exponent)
        };
        dt = dt.min(self.policy.proximity_gain * prox);
        for (b, &nn_sq) in self.pass.drift.iter().zip(&self.pass.nn_sq) {
            let b2 = b.norm_sq();
            if b2 > 0.0 {
                let limit = self.policy.taming_cap * (nn_sq / b2).sqrt();
                if limit < dt {
                    dt = limit;
                }
            }
        }
        dt
    }

    /// Advances `state` using the drift from the last [`Integrator::evaluate`]
    /// call, never past `t_stop`. Appends taming and floor events.
    pub fn advance(
        &mut self,
        state: &mut ParticleState,
        t_stop: f64,
        noise: &mut dyn NoiseSource,
        events: &mut Vec<Event>,
    ) -> Result<StepInfo, DynamicsError> {
        if !state.alive {
            return Err(DynamicsError::NotAlive);
        }
        let floor = self.policy.floor();
        let mut dt = self.proposed_dt();
        let floor_hit = !(dt >= floor);
        if floor_hit {
            dt = floor;
            self.floor_streak += 1;
            if self.floor_streak > self.policy.max_floor_streak {
                return Err(DynamicsError::NoProgress { t: state.t, streak: self.floor_streak, floor });
            }
        } else {
            self.floor_streak = 0;
        }
        let remaining = t_stop - state.t;
        let reaches_stop = remaining <= dt;
        if reaches_stop {
            dt = remaining.max(0.0);
        }

        noise.fill(&mut self.noise_buf);
        let sq = dt.sqrt();
        let cap = self.policy.taming_cap;
        let mut tamed = 0;
        for (i, p) in state.positions.iter_mut().enumerate() {
            let mut disp = self.pass.drift[i] * dt;
            let d2 = disp.norm_sq();
            let limit_sq = cap * cap * self.pass.nn_sq[i];
            if d2 > limit_sq * (1.0 + 1e-12) {
                disp = disp * (limit_sq / d2).sqrt();
                tamed += 1;
            }
            *p += disp + self.noise_buf[i] * sq;
            if !p.is_finite() {
                return Err(DynamicsError::NonFinite { particle: i, t: state.t });
            }
        }
        state.t = if reaches_stop { t_stop } else { state.t + dt };

        if floor_hit && self.floor_streak == 1 {
            events.push(Event {
                t: state.t,
                kind: EventKind::SubstepFloorHit,
                payload: EventPayload::Floor { dt, streak: self.floor_streak },
            });
        }
        if tamed > 0 {
            log::debug!("taming bound on {tamed} particles at t = {}", state.t);
            events.push(Event {
                t: state.t,
                kind: EventKind::TamingActivated,
                payload: EventPayload::Tamed { particles: tamed, dt },
            });
        }
        Ok(StepInfo { dt, tamed, floor_hit })
    }
}

/// One stand-alone step of the scheme from `state`, with no snapshot clipping.
pub fn step(
    state: &mut ParticleState,
    policy: &StepPolicy,
    theta: f64,
    noise: &mut dyn NoiseSource,
) -> Result<(StepInfo, Vec<Event>), DynamicsError> {
    let mut integ = Integrator::new(state.positions.len(), theta, *policy, DriftKernel::Symmetric);
    integ.evaluate(&state.positions);
    let mut events = Vec::new();
    let info = integ.advance(state, f64::INFINITY, noise, &mut events)?;
    Ok((info, events))
}

/// Simulates one replica: the initial configuration is drawn from the seed's
/// initial stream and the noise from its dynamics stream.
pub fn simulate(
    config: &SimConfig,
    law: &InitialLaw,
    seed: &ReplicaSeed,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectoryRecord, DynamicsError> {
    config.validate_dynamics()?;
    let initial = sample_initial(law, config.n, &mut seed.initial_rng())?;
    let mut noise = GaussianNoise(seed.dynamics_rng());
    simulate_from(config, initial, &mut noise, observers)
}

/// Simulates from given initial positions and noise.
pub fn simulate_from(
    config: &SimConfig,
    initial: Vec<Point2>,
    noise: &mut dyn NoiseSource,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectoryRecord, DynamicsError> {
    config.validate_dynamics()?;
    if initial.len() != config.n {
        return Err(DynamicsError::WrongSize { expected: config.n, got: initial.len() });
    }
    let n = config.n;
    let mut state = ParticleState::new(initial);
    let mut integ = Integrator::new(n, config.theta, config.step, config.drift_kernel);
    let mut pending: Vec<CollapseDetector> = config.detectors.clone();
    let blowup = config.blowup_detector();

    let mut record = TrajectoryRecord {
        theta: config.theta,
        n,
        snapshots: Vec::new(),
        events: Vec::new(),
        blowup_time: None,
        steps: 0,
    };
    let snapshot_time = |k: u64| {
        let t = k as f64 * config.snapshot_interval;
        if t >= config.horizon - 1e-9 * config.snapshot_interval {
            config.horizon
        } else {
            t
        }
    };
    let mut next_snap: u64 = 0;
    let mut last_dt = 0.0;

    loop {
        let close = pending.iter().map(|d| d.k as f64 * d.threshold()).fold(None, |a: Option<f64>, r| {
            Some(a.map_or(r, |a| a.max(r)))
        });
        integ.set_close_radius_sq(close);
        integ.evaluate(&state.positions);

        let first_event = record.events.len();
        if !pending.is_empty() {
            let close_pairs = &integ.pass().close_pairs;
            let mut fired = Vec::new();
            for (idx, det) in pending.iter().enumerate() {
                if let Some((indices, r)) = find_collapsed_cluster(&state.positions, close_pairs, det.k, det.threshold()) {
                    fired.push(idx);
                    record.events.push(Event {
                        t: state.t,
                        kind: EventKind::ClusterCollapse,
                        payload: EventPayload::Cluster { indices, k: det.k, ell: det.ell, dispersion: r, dt: last_dt },
                    });
                    if Some(*det) == blowup {
                        state.alive = false;
                        record.blowup_time = Some(state.t);
                    }
                }
            }
            for idx in fired.into_iter().rev() {
                pending.remove(idx);
            }
        }

        for obs in observers.iter_mut() {
            obs.observe(&state, last_dt, &record.events[first_event..]);
        }

        while !state.alive || state.t >= snapshot_time(next_snap) {
            let ts = snapshot_time(next_snap);
            record.snapshots.push(Snapshot { t: ts, positions: state.positions.clone(), alive: state.alive });
            if ts >= config.horizon {
                return Ok(record);
            }
            next_snap += 1;
        }

        let info = integ.advance(&mut state, snapshot_time(next_snap), noise, &mut record.events)?;
        record.steps += 1;
        last_dt = info.dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_u64;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn two_particle_drift() {
        let b = total_drift(&pts(&[(1.0, 0.0), (0.0, 0.0)]), 2.0);
        assert_eq!(b, pts(&[(-1.0, 0.0), (1.0, 0.0)]));
    }

    #[test]
    fn coincident_pair_contributes_nothing() {
        let b = total_drift(&pts(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]), 3.0);
        // Only the pairs involving the third particle act.
        assert_eq!(b[0], b[1]);
        assert_eq!(b[0], Point2::new(1.0, 0.0));
        assert_eq!(b[2], Point2::new(-2.0, 0.0));
    }

    #[test]
    fn kernels_agree() {
        let mut rng = rng_from_u64(4);
        let x: Vec<Point2> = (0..40).map(|_| Point2::new(rng.random(), rng.random())).collect();
        let mut a = PairPass::new(40);
        let mut b = PairPass::new(40);
        a.run(&x, 1.3, DriftKernel::Symmetric, Some(0.01));
        b.run(&x, 1.3, DriftKernel::Parallel, Some(0.01));
        for i in 0..40 {
            assert!((a.drift[i] - b.drift[i]).norm() <= 1e-12 * (1.0 + a.drift[i].norm()));
            assert_eq!(a.nn_sq[i], b.nn_sq[i]);
        }
        assert_eq!(a.close_pairs, b.close_pairs);
    }

    #[test]
    fn finds_planted_cluster() {
        let x = pts(&[(0.0, 0.0), (5.0, 5.0), (1e-4, 0.0), (-5.0, 2.0), (0.0, 1e-4)]);
        let mut pass = PairPass::new(5);
        pass.run(&x, 1.0, DriftKernel::Symmetric, Some(3.0 * 1e-6));
        let (idx, r) = find_collapsed_cluster(&x, &pass.close_pairs, 3, 1e-6).unwrap();
        assert_eq!(idx, vec![0, 2, 4]);
        assert!(r <= 1e-6);
        assert!(find_collapsed_cluster(&x, &pass.close_pairs, 4, 1e-6).is_none());
        assert!(find_collapsed_cluster(&x, &pass.close_pairs, 3, 1e-9).is_none());
    }

    #[test]
    fn first_collapse_time_on_synthetic_record() {
        let mut rec = TrajectoryRecord { theta: 1.0, n: 5, snapshots: vec![], events: vec![], blowup_time: None, steps: 0 };
        assert_eq!(first_collapse_time(&rec, 3, 10.0), None);
        rec.events.push(Event {
            t: 1.5,
            kind: EventKind::ClusterCollapse,
            payload: EventPayload::Cluster { indices: vec![0, 1, 2], k: 3, ell: 10.0, dispersion: 0.05, dt: 1e-3 },
        });
        assert_eq!(first_collapse_time(&rec, 3, 10.0), Some(1.5));
        assert_eq!(first_collapse_time(&rec, 3, 100.0), None);
        assert_eq!(first_collapse_time(&rec, 4, 10.0), None);
    }

    #[test]
    fn event_json_roundtrip() {
        let evs = vec![
            Event { t: 0.5, kind: EventKind::TamingActivated, payload: EventPayload::Tamed { particles: 2, dt: 1e-9 } },
            Event { t: 0.7, kind: EventKind::SubstepFloorHit, payload: EventPayload::Floor { dt: 1e-15, streak: 1 } },
            Event {
                t: 1.0,
                kind: EventKind::ClusterCollapse,
                payload: EventPayload::Cluster { indices: vec![1, 4, 6], k: 3, ell: 1e6, dispersion: 1e-7, dt: 1e-8 },
            },
        ];
        for e in evs {
            let s = serde_json::to_string(&e).unwrap();
            let back: Event = serde_json::from_str(&s).unwrap();
            assert_eq!(back, e);
        }
    }
}
