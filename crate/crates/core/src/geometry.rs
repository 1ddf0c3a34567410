//! Planar geometry shared by every other module: the Coulomb attraction
//! kernel, cluster means and dispersions, the barycentre inequality for
//! closed triangles and the three-point functional `G`.
//!
//! Particle indices are 0-based throughout the crate.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance, per coordinate, on `X + Y + Z = 0` in [`barycentre_gap`].
pub const TRIANGLE_CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("particle index {index} out of range for {len} positions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cluster must contain at least two indices, got {0}")]
    ClusterTooSmall(usize),
    #[error("cluster indices must be strictly increasing")]
    ClusterNotSorted,
    #[error("triangle does not close: |X+Y+Z| = ({0:e}, {1:e})")]
    OpenTriangle(f64, f64),
    #[error("triangle edge is the zero vector")]
    ZeroEdge,
}

/// A point (or vector) of the plane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }

    /// Reflection across the vertical axis.
    #[inline]
    pub fn mirror_x(self) -> Point2 {
        Point2::new(-self.x, self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, rhs: Point2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Point2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn div(self, s: f64) -> Point2 {
        Point2::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Attraction kernel `K(v) = -v / |v|^2`, with `K(0) = 0` exactly.
#[inline]
pub fn pair_kernel(v: Point2) -> Point2 {
    let r2 = v.norm_sq();
    if r2 == 0.0 {
        return Point2::ZERO;
    }
    Point2::new(-v.x / r2, -v.y / r2)
}

/// Sorted, duplicate-free set of at least two particle indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ClusterIndexSet(Vec<usize>);

impl ClusterIndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self, GeometryError> {
        if indices.len() < 2 {
            return Err(GeometryError::ClusterTooSmall(indices.len()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeometryError::ClusterNotSorted);
        }
        Ok(ClusterIndexSet(indices))
    }

    /// The full index set `{0, .., n-1}`.
    pub fn full(n: usize) -> Result<Self, GeometryError> {
        Self::new((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_range(&self, len: usize) -> Result<(), GeometryError> {
        match self.0.last() {
            Some(&index) if index >= len => Err(GeometryError::IndexOutOfRange { index, len }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for ClusterIndexSet {
    type Error = GeometryError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        ClusterIndexSet::new(v)
    }
}

impl From<ClusterIndexSet> for Vec<usize> {
    fn from(c: ClusterIndexSet) -> Vec<usize> {
        c.0
    }
}

/// Mean `S_K` of the positions selected by `cluster`.
pub fn cluster_mean(positions: &[Point2], cluster: &ClusterIndexSet) -> Result<Point2, GeometryError> {
    cluster.check_range(positions.len())?;
    let sum = cluster
        .indices()
        .iter()
        .fold(Point2::ZERO, |acc, &i| acc + positions[i]);
    Ok(sum / cluster.len() as f64)
}

/// Dispersion `R_K = sum_{i in K} |x_i - S_K|^2`.
pub fn cluster_dispersion(
    positions: &[Point2],
    cluster: &ClusterIndexSet,
) -> Result<f64, GeometryError> {
    let mean = cluster_mean(positions, cluster)?;
    Ok(cluster
        .indices()
        .iter()
        .map(|&i| (positions[i] - mean).norm_sq())
        .sum())
}

/// Dispersion of the whole configuration, `R_{[1,N]}`.
pub fn total_dispersion(positions: &[Point2]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let mean = positions.iter().fold(Point2::ZERO, |a, &p| a + p) / positions.len() as f64;
    positions.iter().map(|&p| (p - mean).norm_sq()).sum()
}

/// `L(r) = log(1 + 1/r) - 1/(1 + r)` for `r > 0`.
///
/// For large `r` the two terms cancel, so there it is summed as
/// `sum_{m>=2} w^m/m` with `w = 1/(1+r)`, keeping full relative precision.
pub fn log_kernel(r: f64) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let w = 1.0 / (1.0 + r);
    if w < 0.125 {
        // Terms decay at least like 8^-m.
        let mut term = w * w;
        let mut sum = 0.0;
        let mut m = 2.0;
        while term / m > sum * 1e-18 {
            sum += term / m;
            term *= w;
            m += 1.0;
        }
        sum
    } else {
        (1.0 / r).ln_1p() - w
    }
}

/// Declared monotonicity of a [`RadialWeight`]. Trusted at call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Nonincreasing,
    Unknown,
}

/// A positive function of a radius, as consumed by [`barycentre_gap`].
pub trait RadialWeight {
    fn eval(&self, r: f64) -> f64;

    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Unknown
    }
}

/// `r -> r^(-p)`.
#[derive(Debug, Clone, Copy)]
pub struct PowerWeight {
    pub p: f64,
}

impl RadialWeight for PowerWeight {
    fn eval(&self, r: f64) -> f64 {
        r.powf(-self.p)
    }
    fn monotonicity(&self) -> Monotonicity {
        if self.p >= 0.0 {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::Unknown
        }
    }
}

/// `r -> L(r^2)`, see [`log_kernel`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LogKernelWeight;

impl RadialWeight for LogKernelWeight {
    fn eval(&self, r: f64) -> f64 {
        log_kernel(r * r)
    }
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Nonincreasing
    }
}

/// Piecewise-linear interpolation of a table, constant beyond both ends.
#[derive(Debug, Clone)]
pub struct TabulatedWeight {
    knots: Vec<(f64, f64)>,
    monotonicity: Monotonicity,
}

impl TabulatedWeight {
    /// `knots` must be sorted by abscissa. The declared monotonicity is not checked.
    pub fn new(knots: Vec<(f64, f64)>, monotonicity: Monotonicity) -> Self {
        TabulatedWeight { knots, monotonicity }
    }
}

impl RadialWeight for TabulatedWeight {
    fn eval(&self, r: f64) -> f64 {
        let k = &self.knots;
        match k.partition_point(|&(x, _)| x <= r) {
            0 => k.first().map_or(0.0, |p| p.1),
            i if i == k.len() => k[i - 1].1,
            i => {
                let (x0, y0) = k[i - 1];
                let (x1, y1) = k[i];
                y0 + (y1 - y0) * (r - x0) / (x1 - x0)
            }
        }
    }
    fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }
}

/// Wraps a closure together with a declared monotonicity.
pub struct FnWeight<F>(pub F, pub Monotonicity);

impl<F: Fn(f64) -> f64> RadialWeight for FnWeight<F> {
    fn eval(&self, r: f64) -> f64 {
        (self.0)(r)
    }
    fn monotonicity(&self) -> Monotonicity {
        self.1
    }
}

/// Result of [`barycentre_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentreGap {
    pub delta: f64,
    pub lower_bound: f64,
}

/// For a closed triangle `X + Y + Z = 0` with nonzero edges and nonincreasing
/// positive weights, computes
/// `delta = [phi(|X|)X + phi(|Y|)Y + phi(|Z|)Z] . [psi(|X|)X + psi(|Y|)Y + psi(|Z|)Z]`
/// together with `(phi(a)-phi(b))(psi(a)-psi(b)) a^2`, `a <= b` the two
/// shortest edge lengths. For such weights `delta >= lower_bound >= 0`.
pub fn barycentre_gap(
    x: Point2,
    y: Point2,
    z: Point2,
    phi: &dyn RadialWeight,
    psi: &dyn RadialWeight,
) -> Result<BarycentreGap, GeometryError> {
    let closure = x + y + z;
    if closure.x.abs() > TRIANGLE_CLOSURE_TOL || closure.y.abs() > TRIANGLE_CLOSURE_TOL {
        return Err(GeometryError::OpenTriangle(closure.x, closure.y));
    }
    if x.is_zero() || y.is_zero() || z.is_zero() {
        return Err(GeometryError::ZeroEdge);
    }
    let mut norms = [x.norm(), y.norm(), z.norm()];
    let weighted = |w: &dyn RadialWeight| x * w.eval(norms[0]) + y * w.eval(norms[1]) + z * w.eval(norms[2]);
    let delta = weighted(phi).dot(weighted(psi));

    norms.sort_by(f64::total_cmp);
    let (a, b) = (norms[0], norms[1]);
    let lower_bound = (phi.eval(a) - phi.eval(b)) * (psi.eval(a) - psi.eval(b)) * a * a;
    Ok(BarycentreGap { delta, lower_bound })
}

/// A nonnegative real extended with `+infinity`.
///
/// Used where a functional is genuinely infinite on a degenerate set, so that
/// averages can saturate instead of being polluted by a large finite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    /// `f64` view, mapping the sentinel to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

/// Three-point functional
///
/// ```text
/// G(x,y,z) = (L(|X|^2) X + L(|Y|^2) Y + L(|Z|^2) Z) . (X/|X|^2 + Y/|Y|^2 + Z/|Z|^2)
/// ```
///
/// with `X = x-y`, `Y = y-z`, `Z = z-x`. It is `+inf` when some but not all
/// edges vanish and `0` when the three points coincide.
pub fn g_functional(x: Point2, y: Point2, z: Point2) -> ExtendedReal {
    let (ex, ey, ez) = (x - y, y - z, z - x);
    let zeros = [ex, ey, ez].iter().filter(|e| e.is_zero()).count();
    match zeros {
        0 => {}
        3 => return ExtendedReal::Finite(0.0),
        _ => return ExtendedReal::Infinite,
    }
    let (nx, ny, nz) = (ex.norm_sq(), ey.norm_sq(), ez.norm_sq());
    let first = ex * log_kernel(nx) + ey * log_kernel(ny) + ez * log_kernel(nz);
    let second = ex / nx + ey / ny + ez / nz;
    ExtendedReal::Finite(first.dot(second))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(pair_kernel(Point2::ZERO), Point2::ZERO);
        assert_eq!(pair_kernel(Point2::new(2.0, 0.0)), Point2::new(-0.5, 0.0));
        assert_eq!(pair_kernel(Point2::new(1.0, 1.0)), Point2::new(-0.5, -0.5));
    }

    #[test]
    fn kernel_norm_is_inverse_distance() {
        for &(x, y) in &[(3.0, 4.0), (1e-7, -2e-7), (123.0, 0.5)] {
            let v = Point2::new(x, y);
            let rel = (pair_kernel(v).norm() * v.norm() - 1.0).abs();
            assert!(rel <= 1e-12, "{rel}");
        }
    }

    #[test]
    fn cluster_examples() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let k = ClusterIndexSet::full(3).unwrap();
        assert_eq!(cluster_mean(&p, &k).unwrap(), Point2::new(1.0, 0.0));
        assert_eq!(cluster_dispersion(&p, &k).unwrap(), 2.0);

        let q = pts(&[(0.0, 0.0), (4.0, 2.0)]);
        let k2 = ClusterIndexSet::new(vec![0, 1]).unwrap();
        assert_eq!(cluster_mean(&q, &k2).unwrap(), Point2::new(2.0, 1.0));

        let r = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        assert_eq!(cluster_dispersion(&r, &k2).unwrap(), 2.0);

        let same = pts(&[(0.3, -1.2); 4]);
        assert_eq!(cluster_dispersion(&same, &ClusterIndexSet::full(4).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn cluster_rejections() {
        assert_eq!(ClusterIndexSet::new(vec![0]), Err(GeometryError::ClusterTooSmall(1)));
        assert_eq!(ClusterIndexSet::new(vec![2, 1]), Err(GeometryError::ClusterNotSorted));
        assert_eq!(ClusterIndexSet::new(vec![1, 1]), Err(GeometryError::ClusterNotSorted));
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let k = ClusterIndexSet::new(vec![0, 2]).unwrap();
        assert_eq!(
            cluster_mean(&p, &k),
            Err(GeometryError::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn barycentre_examples() {
        let inv_sq = PowerWeight { p: 2.0 };
        let s3 = 3f64.sqrt() / 2.0;
        let a = Point2::new(1.0, 0.0);
        let b = Point2::new(-0.5, s3);
        let c = -(a + b);
        let gap = barycentre_gap(a, b, c, &inv_sq, &inv_sq).unwrap();
        assert!(gap.delta.abs() < 1e-24, "{}", gap.delta);

        let inv = PowerWeight { p: 1.0 };
        let gap = barycentre_gap(
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(-1.0, -1.0),
            &inv,
            &inv,
        )
        .unwrap();
        // |X| = |Y| so the bound degenerates to zero.
        assert_eq!(gap.lower_bound, 0.0);
        assert!(gap.delta >= 0.0);
        // [X + Y + Z/sqrt2]^2 = |(1 - 1/sqrt2)(1,1)|^2
        let expected = 2.0 * (1.0 - 1.0 / 2f64.sqrt()).powi(2);
        assert!((gap.delta - expected).abs() < 1e-15);
    }

    #[test]
    fn barycentre_preconditions() {
        let w = PowerWeight { p: 1.0 };
        let open = barycentre_gap(
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(-1.0, -1.0 + 1e-9),
            &w,
            &w,
        );
        assert!(matches!(open, Err(GeometryError::OpenTriangle(..))));
        let degenerate = barycentre_gap(Point2::ZERO, Point2::new(1.0, 0.0), Point2::new(-1.0, 0.0), &w, &w);
        assert_eq!(degenerate, Err(GeometryError::ZeroEdge));
    }

    #[test]
    fn tabulated_weight_interpolates() {
        let t = TabulatedWeight::new(vec![(0.0, 4.0), (1.0, 2.0), (3.0, 0.0)], Monotonicity::Nonincreasing);
        assert_eq!(t.eval(-1.0), 4.0);
        assert_eq!(t.eval(0.5), 3.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(10.0), 0.0);
    }

    #[test]
    fn g_functional_cases() {
        let p = Point2::new(0.4, -2.0);
        assert_eq!(g_functional(p, p, p), ExtendedReal::Finite(0.0));
        assert_eq!(g_functional(p, p, Point2::new(1.0, 1.0)), ExtendedReal::Infinite);
        let s3 = 3f64.sqrt() / 2.0;
        let g = g_functional(Point2::new(1.0, 0.0), Point2::new(-0.5, s3), Point2::new(-0.5, -s3));
        assert!(g.finite().unwrap().abs() < 1e-14);
    }

    #[test]
    fn log_kernel_matches_direct_formula() {
        for &r in &[1e-6f64, 0.01, 0.5, 1.0, 3.0, 7.0, 20.0] {
            let direct = (1.0 + 1.0 / r).ln() - 1.0 / (1.0 + r);
            assert!((log_kernel(r) - direct).abs() <= 1e-13 * direct.abs().max(1e-3), "r={r}");
        }
        // Large-r asymptote 1/(2 r^2).
        let r = 1e8;
        assert!((log_kernel(r) * 2.0 * r * r - 1.0).abs() < 1e-7);
    }

    #[test]
    fn log_kernel_positive_and_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..=1600 {
            let r = 10f64.powf(-8.0 + 16.0 * i as f64 / 1600.0);
            let v = log_kernel(r);
            assert!(v > 0.0 && v < prev, "r={r} v={v} prev={prev}");
            prev = v;
        }
    }

    #[test]
    fn total_dispersion_matches_cluster_form() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(total_dispersion(&p), 2.0);
    }
}
