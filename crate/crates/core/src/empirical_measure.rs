//! Empirical measures, a weak-convergence metric, the Hoelder path modulus and
//! the weak-formulation residual.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::TrajectoryRecord;
use crate::geometry::{pair_kernel, Point2};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("an empirical measure needs at least one atom")]
    Empty,
    #[error("need at least {0} snapshots")]
    TooFewSnapshots(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Uniform-weight atomic measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<Point2>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Point2>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        Ok(EmpiricalMeasure { atoms })
    }

    pub fn atoms(&self) -> &[Point2] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.atoms.iter().map(|&p| f(p)).sum::<f64>() / self.atoms.len() as f64
    }
}

/// A `C^2` function of the plane with its derivatives.
pub trait TestFunction {
    fn value(&self, x: Point2) -> f64;
    fn gradient(&self, x: Point2) -> Point2;
    /// `[[d_xx, d_xy], [d_yx, d_yy]]`.
    fn hessian(&self, x: Point2) -> [[f64; 2]; 2];
    fn laplacian(&self, x: Point2) -> f64 {
        let h = self.hessian(x);
        h[0][0] + h[1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _: Point2) -> f64 {
        self.0
    }
    fn gradient(&self, _: Point2) -> Point2 {
        Point2::ZERO
    }
    fn hessian(&self, _: Point2) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// `x -> a . x + c`. Unbounded, so only for identities on finite data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub a: Point2,
    pub c: f64,
}

impl TestFunction for Linear {
    fn value(&self, x: Point2) -> f64 {
        self.a.dot(x) + self.c
    }
    fn gradient(&self, _: Point2) -> Point2 {
        self.a
    }
    fn hessian(&self, _: Point2) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// Adds a constant to another test function.
pub struct Shifted<'a>(pub &'a dyn TestFunction, pub f64);

impl TestFunction for Shifted<'_> {
    fn value(&self, x: Point2) -> f64 {
        self.0.value(x) + self.1
    }
    fn gradient(&self, x: Point2) -> Point2 {
        self.0.gradient(x)
    }
    fn hessian(&self, x: Point2) -> [[f64; 2]; 2] {
        self.0.hessian(x)
    }
    fn laplacian(&self, x: Point2) -> f64 {
        self.0.laplacian(x)
    }
}

/// `amp * exp(-|x - a|^2 / (2 s^2)) * cos(k . x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedWave {
    pub center: Point2,
    pub width: f64,
    pub freq: Point2,
    pub phase: f64,
    pub amplitude: f64,
}

impl WindowedWave {
    pub fn gaussian_bump(center: Point2, width: f64, amplitude: f64) -> Self {
        WindowedWave { center, width, freq: Point2::ZERO, phase: 0.0, amplitude }
    }

    /// Upper bounds on `sup |grad|` and on the sup of the Frobenius norm of
    /// the Hessian for unit amplitude.
    pub fn derivative_bounds(width: f64, freq_norm: f64) -> (f64, f64) {
        let e_half = (-0.5f64).exp();
        let s = width;
        let k = freq_norm;
        let grad = e_half / s + k;
        let hess = 2.0 / (std::f64::consts::E * s * s) + std::f64::consts::SQRT_2 / (s * s) + 2.0 * k * e_half / s + k * k;
        (grad, hess)
    }

    #[inline]
    fn parts(&self, x: Point2) -> (Point2, f64, f64, f64) {
        let u = x - self.center;
        let s2 = self.width * self.width;
        let g = (-0.5 * u.norm_sq() / s2).exp();
        let arg = self.freq.dot(x) + self.phase;
        (u, g, arg.cos(), arg.sin())
    }
}

impl TestFunction for WindowedWave {
    fn value(&self, x: Point2) -> f64 {
        let (_, g, c, _) = self.parts(x);
        self.amplitude * g * c
    }

    fn gradient(&self, x: Point2) -> Point2 {
        let (u, g, c, s) = self.parts(x);
        let s2 = self.width * self.width;
        // grad(g) = -u g / s^2, grad(cos) = -sin k
        (u * (-c / s2) - self.freq * s) * (self.amplitude * g)
    }

    fn hessian(&self, x: Point2) -> [[f64; 2]; 2] {
        let (u, g, c, s) = self.parts(x);
        let s2 = self.width * self.width;
        let k = self.freq;
        let uv = [u.x, u.y];
        let kv = [k.x, k.y];
        let mut h = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let hg = uv[a] * uv[b] / (s2 * s2) - delta / s2;
                let cross = (uv[a] * kv[b] + uv[b] * kv[a]) / s2;
                h[a][b] = self.amplitude * g * (hg * c + cross * s - kv[a] * kv[b] * c);
            }
        }
        h
    }

    fn laplacian(&self, x: Point2) -> f64 {
        let (u, g, c, s) = self.parts(x);
        let s2 = self.width * self.width;
        let lap_g = u.norm_sq() / (s2 * s2) - 2.0 / s2;
        let cross = 2.0 * u.dot(self.freq) / s2;
        self.amplitude * g * (lap_g * c + cross * s - self.freq.norm_sq() * c)
    }
}

/// The countable family `(phi_n)` defining the weak metric.
///
/// `phi_n` is a Gaussian-windowed plane wave: widths cycle through
/// `{0.5, 1, 2}`, frequencies lie on a Vogel spiral, phases alternate between
/// `0` and `pi/2` and window centres lie on a second spiral. Each member is
/// scaled by `1 / (1 + G + H)` with `G`, `H` the analytic gradient and
/// Hessian bounds, so `|phi| + |grad phi| + |hess phi| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    members: Vec<WindowedWave>,
}

pub const DEFAULT_N_TERMS: usize = 64;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const FREQ_STEP: f64 = 0.75;
const CENTER_STEP: f64 = 0.5;

impl TestFunctionFamily {
    pub fn new(len: usize) -> Self {
        let members = (0..len).map(Self::member).collect();
        TestFunctionFamily { members }
    }

    pub fn member(n: usize) -> WindowedWave {
        let nf = n as f64;
        let width = [0.5, 1.0, 2.0][n % 3];
        let kr = FREQ_STEP * nf.sqrt();
        let ka = nf * GOLDEN_ANGLE;
        let freq = Point2::new(kr * ka.cos(), kr * ka.sin());
        let cr = CENTER_STEP * nf.sqrt();
        let ca = nf * GOLDEN_ANGLE * 0.5 + 1.0;
        let center = Point2::new(cr * ca.cos(), cr * ca.sin());
        let phase = if n % 2 == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
        let (g, h) = WindowedWave::derivative_bounds(width, freq.norm());
        WindowedWave { center, width, freq, phase, amplitude: 1.0 / (1.0 + g + h) }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, n: usize) -> &WindowedWave {
        &self.members[n]
    }

    pub fn members(&self) -> &[WindowedWave] {
        &self.members
    }

    /// SHA-256 over the exact parameters, recorded in run metadata.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.members {
            for v in [m.center.x, m.center.y, m.width, m.freq.x, m.freq.y, m.phase, m.amplitude] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// `(int phi_n d mu)_n` for the first `n_terms` members.
    pub fn moments(&self, mu: &EmpiricalMeasure, n_terms: usize) -> Vec<f64> {
        self.members[..n_terms.min(self.len())].iter().map(|f| mu.integrate(|x| f.value(x))).collect()
    }
}

impl Default for TestFunctionFamily {
    fn default() -> Self {
        TestFunctionFamily::new(DEFAULT_N_TERMS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakDistance {
    pub value: f64,
    /// Bound on the omitted tail `sum_{n >= n_terms}`.
    pub tail_bound: f64,
}

/// Tail of `sum_n 2^-n |int phi_n d(mu - nu)|` beyond `n_terms` terms, using
/// `|int phi_n d(mu - nu)| <= 2`.
pub fn tail_bound(n_terms: usize) -> f64 {
    4.0 * 0.5f64.powi(n_terms as i32)
}

fn series_from_moments(a: &[f64], b: &[f64]) -> f64 {
    let mut w = 1.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += w * (x - y).abs();
        w *= 0.5;
    }
    total
}

/// `delta(mu, nu) = sum_{n < n_terms} 2^-n |int phi_n d mu - int phi_n d nu|`.
pub fn weak_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, family: &TestFunctionFamily, n_terms: usize) -> Result<WeakDistance, MeasureError> {
    if n_terms == 0 || n_terms > family.len() {
        return Err(MeasureError::InvalidArgument(format!("n_terms must lie in [1, {}]", family.len())));
    }
    let value = series_from_moments(&family.moments(mu, n_terms), &family.moments(nu, n_terms));
    Ok(WeakDistance { value, tail_bound: tail_bound(n_terms) })
}

/// `max_{s < t} delta(mu_s, mu_t) / (t - s)^exponent` over snapshot pairs.
pub fn holder_modulus(path: &[(f64, EmpiricalMeasure)], exponent: f64, family: &TestFunctionFamily, n_terms: usize) -> Result<f64, MeasureError> {
    if path.len() < 2 {
        return Err(MeasureError::TooFewSnapshots(2));
    }
    if n_terms == 0 || n_terms > family.len() {
        return Err(MeasureError::InvalidArgument(format!("n_terms must lie in [1, {}]", family.len())));
    }
    let moments: Vec<Vec<f64>> = path.iter().map(|(_, m)| family.moments(m, n_terms)).collect();
    let mut best: f64 = 0.0;
    for i in 0..path.len() {
        for j in (i + 1)..path.len() {
            let dt = (path[j].0 - path[i].0).abs();
            if dt == 0.0 {
                continue;
            }
            best = best.max(series_from_moments(&moments[i], &moments[j]) / dt.powf(exponent));
        }
    }
    Ok(best)
}

/// Alive snapshots of a record as a measure path.
pub fn measure_path(record: &TrajectoryRecord) -> Vec<(f64, EmpiricalMeasure)> {
    record
        .snapshots
        .iter()
        .take_while(|s| s.alive)
        .map(|s| (s.t, EmpiricalMeasure { atoms: s.positions.clone() }))
        .collect()
}

/// Integrand of the weak formulation at one configuration:
/// `1/2 int lap(phi) d mu + theta/2 int int K(x-y).(grad phi(x) - grad phi(y)) d mu d mu`,
/// the diagonal contributing zero.
pub fn generator_term(x: &[Point2], phi: &dyn TestFunction, theta: f64) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let lap: f64 = x.iter().map(|&p| phi.laplacian(p)).sum::<f64>() / nf;
    if theta == 0.0 {
        return 0.5 * lap;
    }
    let grads: Vec<Point2> = x.iter().map(|&p| phi.gradient(p)).collect();
    let mut inter = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            inter += pair_kernel(x[i] - x[j]).dot(grads[i] - grads[j]);
        }
    }
    // Ordered pairs double the unordered sum.
    0.5 * lap + 0.5 * theta * 2.0 * inter / (nf * nf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Difference between the trapezoid and left-point rules at the end of
    /// the series, a proxy for the time-quadrature error.
    pub quadrature_error: f64,
    /// Set when `quadrature_error` exceeds 10% of the largest residual.
    pub coarse: bool,
}

impl ResidualSeries {
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))?;
        Some(self.values[i])
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// `R(t) = <phi, mu_t> - <phi, mu_0> - int_0^t generator_term(mu_s) ds` at
/// every alive snapshot up to `until`, trapezoid rule in time.
pub fn weak_solution_residual(record: &TrajectoryRecord, phi: &dyn TestFunction, until: Option<f64>) -> Result<ResidualSeries, MeasureError> {
    let snaps: Vec<_> = record
        .snapshots
        .iter()
        .take_while(|s| s.alive && until.is_none_or(|u| s.t <= u + 1e-12))
        .collect();
    if snaps.is_empty() {
        return Err(MeasureError::TooFewSnapshots(1));
    }
    let nf = record.n as f64;
    let mean_phi = |x: &[Point2]| x.iter().map(|&p| phi.value(p)).sum::<f64>() / nf;
    let phi0 = mean_phi(&snaps[0].positions);
    let mut g_prev = generator_term(&snaps[0].positions, phi, record.theta);
    let (mut trap, mut left) = (0.0, 0.0);
    let mut times = vec![snaps[0].t];
    let mut values = vec![0.0];
    for w in snaps.windows(2) {
        let dt = w[1].t - w[0].t;
        let g = generator_term(&w[1].positions, phi, record.theta);
        trap += 0.5 * dt * (g_prev + g);
        left += dt * g_prev;
        g_prev = g;
        times.push(w[1].t);
        values.push(mean_phi(&w[1].positions) - phi0 - trap);
    }
    let quadrature_error = (trap - left).abs();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let coarse = quadrature_error > 0.1 * scale && quadrature_error > 1e-12;
    Ok(ResidualSeries { times, values, quadrature_error, coarse })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diffuseness {
    /// Fraction of ordered pairs `i != j` closer than the scale.
    pub close_fraction: f64,
    /// Fraction of ordered pairs `i != j` with identical positions.
    pub exact_fraction: f64,
}

pub fn diffuseness_monitor(mu: &EmpiricalMeasure, collision_scale: f64) -> Result<Diffuseness, MeasureError> {
    if !(collision_scale > 0.0) {
        return Err(MeasureError::InvalidArgument("collision_scale must be > 0".into()));
    }
    let x = mu.atoms();
    let n = x.len();
    if n < 2 {
        return Ok(Diffuseness { close_fraction: 0.0, exact_fraction: 0.0 });
    }
    let s2 = collision_scale * collision_scale;
    let (mut close, mut exact) = (0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = (x[i] - x[j]).norm_sq();
            if d2 < s2 {
                close += 1;
            }
            if d2 == 0.0 {
                exact += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(Diffuseness { close_fraction: close as f64 / pairs, exact_fraction: exact as f64 / pairs })
}
