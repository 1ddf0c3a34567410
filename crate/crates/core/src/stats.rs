//! Small statistics toolbox used by the diagnostics.

use statrs::distribution::{ContinuousCDF, Normal};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile (type 7). Infinite values sort last.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || v[lo] == v[hi] {
        return v[lo];
    }
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Least squares through the origin, `y = b x`, with heteroskedasticity
/// robust (HC0) standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub slope: f64,
    pub stderr: f64,
}

pub fn ols_through_origin(x: &[f64], y: &[f64]) -> Option<OriginFit> {
    assert_eq!(x.len(), y.len());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 || x.is_empty() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let meat: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - slope * a;
            a * a * e * e
        })
        .sum();
    Some(OriginFit { slope, stderr: meat.sqrt() / sxx })
}

/// One-sided Mann-Whitney test of `H1: Y tends to exceed X`.
///
/// Normal approximation with tie correction and continuity correction.
/// Returns `(U_y, p)` where `U_y` counts pairs with `y > x` (ties count half).
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    if x.is_empty() || y.is_empty() {
        return (f64::NAN, 1.0);
    }
    let mut all: Vec<(f64, bool)> = x.iter().map(|&v| (v, false)).chain(y.iter().map(|&v| (v, true))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for rank in &mut ranks[i..=j] {
            *rank = r;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let r_y: f64 = all.iter().zip(&ranks).filter(|(a, _)| a.1).map(|(_, r)| r).sum();
    let u_y = r_y - n2 * (n2 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return (u_y, 1.0);
    }
    let z = (u_y - mu - 0.5) / var.sqrt();
    let p = 1.0 - Normal::standard().cdf(z);
    (u_y, p)
}
