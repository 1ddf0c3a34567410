//! Exchangeable initial configurations.
//!
//! Every law draws `n` i.i.d. base points, clamps each coordinate to
//! `[-n, n]` and, for atomic laws, adds an independent Gaussian jitter of
//! standard deviation `jitter_scale / n` so that the configuration has
//! pairwise-distinct points almost surely.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

pub const MIN_PARTICLES: usize = 5;
const MAX_RESAMPLES: usize = 100;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("at least {MIN_PARTICLES} particles are required, got {0}")]
    TooFewParticles(usize),
    #[error("invalid initial law: {0}")]
    InvalidLaw(String),
    #[error("could not draw {MAX_RESAMPLES} duplicate-free configurations")]
    DuplicatePoints,
    #[error("reading atom file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("atom file {path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub x: f64,
    pub y: f64,
}

impl Atom {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

fn default_jitter() -> f64 {
    1.0
}

fn default_std() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    GaussianIid {
        #[serde(default)]
        center: Point2,
        #[serde(default = "default_std")]
        std: f64,
    },
    UniformDiskIid {
        #[serde(default)]
        center: Point2,
        radius: f64,
    },
    AtomPlusJitter {
        atoms: Vec<Atom>,
        #[serde(default = "default_jitter")]
        jitter_scale: f64,
    },
    /// Atoms read from a `weight x y` table. `atoms` is filled by
    /// [`InitialLaw::resolve`] so that resolved laws are self-contained.
    FileAtoms {
        path: PathBuf,
        #[serde(default = "default_jitter")]
        jitter_scale: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        atoms: Vec<Atom>,
    },
}

impl InitialLaw {
    /// Two equal-weight atoms at `(-d/2, 0)` and `(d/2, 0)`.
    pub fn two_atoms(separation: f64) -> Self {
        InitialLaw::AtomPlusJitter {
            atoms: vec![
                Atom { weight: 0.5, x: -0.5 * separation, y: 0.0 },
                Atom { weight: 0.5, x: 0.5 * separation, y: 0.0 },
            ],
            jitter_scale: 1.0,
        }
    }

    pub fn gaussian(std: f64) -> Self {
        InitialLaw::GaussianIid { center: Point2::ZERO, std }
    }

    /// Loads file atoms, leaving other laws untouched.
    pub fn resolve(self) -> Result<Self, InitError> {
        match self {
            InitialLaw::FileAtoms { path, jitter_scale, atoms } if atoms.is_empty() => {
                let atoms = read_atom_file(&path)?;
                Ok(InitialLaw::FileAtoms { path, jitter_scale, atoms })
            }
            other => Ok(other),
        }
    }

    pub fn validate(&self) -> Result<(), InitError> {
        let bad = |m: String| Err(InitError::InvalidLaw(m));
        match self {
            InitialLaw::GaussianIid { center, std } => {
                if !center.is_finite() || !(*std > 0.0 && std.is_finite()) {
                    return bad(format!("gaussian needs finite center and std > 0, got std={std}"));
                }
            }
            InitialLaw::UniformDiskIid { center, radius } => {
                if !center.is_finite() || !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("disk radius must be > 0, got {radius}"));
                }
            }
            InitialLaw::AtomPlusJitter { atoms, jitter_scale }
            | InitialLaw::FileAtoms { atoms, jitter_scale, .. } => {
                if atoms.is_empty() {
                    return bad("atomic law without atoms (unresolved atom file?)".into());
                }
                if !(*jitter_scale > 0.0 && jitter_scale.is_finite()) {
                    return bad(format!("jitter_scale must be > 0, got {jitter_scale}"));
                }
                if atoms.iter().any(|a| !(a.weight > 0.0) || !a.position().is_finite()) {
                    return bad("atom weights must be positive and positions finite".into());
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return bad(format!("atom weights sum to {total}, expected 1"));
                }
            }
        }
        Ok(())
    }

    /// True when the law is a single full Dirac mass, which the critical-case
    /// convergence theory excludes.
    pub fn is_full_dirac(&self) -> bool {
        match self {
            InitialLaw::AtomPlusJitter { atoms, .. } | InitialLaw::FileAtoms { atoms, .. } => {
                atoms.iter().any(|a| a.weight >= 1.0 - WEIGHT_SUM_TOL)
            }
            _ => false,
        }
    }

    fn draw_point<R: Rng + ?Sized>(&self, n: usize, picker: Option<&WeightedIndex<f64>>, rng: &mut R) -> Point2 {
        let base = match self {
            InitialLaw::GaussianIid { center, std } => *center + gaussian_pair(rng) * *std,
            InitialLaw::UniformDiskIid { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let a = std::f64::consts::TAU * rng.random::<f64>();
                *center + Point2::new(r * a.cos(), r * a.sin())
            }
            InitialLaw::AtomPlusJitter { atoms, .. } | InitialLaw::FileAtoms { atoms, .. } => {
                let idx = picker.map_or(0, |w| w.sample(rng));
                atoms[idx].position()
            }
        };
        let clamped = clamp_chi(base, n);
        match self {
            InitialLaw::AtomPlusJitter { jitter_scale, .. } | InitialLaw::FileAtoms { jitter_scale, .. } => {
                clamped + gaussian_pair(rng) * (jitter_scale / n as f64)
            }
            _ => clamped,
        }
    }
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> Point2 {
    Point2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Coordinate-wise clamp to `[-n, n]`.
pub fn clamp_chi(p: Point2, n: usize) -> Point2 {
    let m = n as f64;
    Point2::new(p.x.clamp(-m, m), p.y.clamp(-m, m))
}

/// Draws `n` exchangeable, pairwise-distinct points from `law`.
pub fn sample_initial<R: Rng + ?Sized>(law: &InitialLaw, n: usize, rng: &mut R) -> Result<Vec<Point2>, InitError> {
    if n < MIN_PARTICLES {
        return Err(InitError::TooFewParticles(n));
    }
    law.validate()?;
    let picker = match law {
        InitialLaw::AtomPlusJitter { atoms, .. } | InitialLaw::FileAtoms { atoms, .. } => Some(
            WeightedIndex::new(atoms.iter().map(|a| a.weight))
                .map_err(|e| InitError::InvalidLaw(e.to_string()))?,
        ),
        _ => None,
    };
    for _ in 0..MAX_RESAMPLES {
        let points: Vec<Point2> = (0..n).map(|_| law.draw_point(n, picker.as_ref(), rng)).collect();
        if !has_exact_duplicates(&points) {
            return Ok(points);
        }
    }
    Err(InitError::DuplicatePoints)
}

/// Bitwise duplicate detection.
pub fn has_exact_duplicates(points: &[Point2]) -> bool {
    let mut keys: Vec<(u64, u64)> = points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    keys.sort_unstable();
    keys.windows(2).any(|w| w[0] == w[1])
}

/// Empirical sixth moment `mean |x|^6`, reported in run metadata.
pub fn sixth_moment(points: &[Point2]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().map(|p| p.norm_sq().powi(3)).sum::<f64>() / points.len() as f64
}

/// Parses a `weight x y` table; blank lines and `#` comments are skipped and
/// weights are renormalised to sum to one.
pub fn parse_atom_table(text: &str, path: &Path) -> Result<Vec<Atom>, InitError> {
    let mut atoms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| InitError::Parse { path: path.to_path_buf(), line: lineno + 1, msg };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|e| err(format!("{f:?}: {e}")))?;
        }
        if !(vals[0] > 0.0) {
            return Err(err(format!("weight must be positive, got {}", vals[0])));
        }
        atoms.push(Atom { weight: vals[0], x: vals[1], y: vals[2] });
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if atoms.is_empty() {
        return Err(InitError::Parse { path: path.to_path_buf(), line: 0, msg: "no atoms".into() });
    }
    for a in &mut atoms {
        a.weight /= total;
    }
    Ok(atoms)
}

pub fn read_atom_file(path: &Path) -> Result<Vec<Atom>, InitError> {
    let text = fs::read_to_string(path).map_err(|source| InitError::Io { path: path.to_path_buf(), source })?;
    parse_atom_table(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_u64;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_chi(Point2::new(0.0, 0.0), 5), Point2::new(0.0, 0.0));
        assert_eq!(clamp_chi(Point2::new(10.0, -10.0), 5), Point2::new(5.0, -5.0));
        assert_eq!(clamp_chi(Point2::new(3.0, 7.0), 5), Point2::new(3.0, 5.0));
    }

    #[test]
    fn atom_plus_jitter_near_origin() {
        let law = InitialLaw::AtomPlusJitter {
            atoms: vec![Atom { weight: 1.0, x: 0.0, y: 0.0 }],
            jitter_scale: 1.0,
        };
        let pts = sample_initial(&law, 100, &mut rng_from_u64(3)).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(!has_exact_duplicates(&pts));
        // Jitter std is 1/100 per coordinate; 6 sigma envelope.
        assert!(pts.iter().all(|p| p.norm() < 0.06 * 2f64.sqrt()));
        assert!(law.is_full_dirac());
    }

    #[test]
    fn same_seed_same_output() {
        let law = InitialLaw::gaussian(1.0);
        let a = sample_initial(&law, 50, &mut rng_from_u64(11)).unwrap();
        let b = sample_initial(&law, 50, &mut rng_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&law, 50, &mut rng_from_u64(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_small_n_and_bad_laws() {
        let law = InitialLaw::gaussian(1.0);
        assert!(matches!(sample_initial(&law, 4, &mut rng_from_u64(0)), Err(InitError::TooFewParticles(4))));
        let bad = InitialLaw::UniformDiskIid { center: Point2::ZERO, radius: 0.0 };
        assert!(matches!(sample_initial(&bad, 10, &mut rng_from_u64(0)), Err(InitError::InvalidLaw(_))));
        let unnormalised = InitialLaw::AtomPlusJitter {
            atoms: vec![Atom { weight: 0.7, x: 0.0, y: 0.0 }, Atom { weight: 0.7, x: 1.0, y: 0.0 }],
            jitter_scale: 1.0,
        };
        assert!(unnormalised.validate().is_err());
        let no_jitter = InitialLaw::AtomPlusJitter {
            atoms: vec![Atom { weight: 1.0, x: 0.0, y: 0.0 }],
            jitter_scale: 0.0,
        };
        assert!(no_jitter.validate().is_err());
    }

    #[test]
    fn gaussian_mean_within_five_standard_errors() {
        let center = Point2::new(1.5, -0.5);
        let law = InitialLaw::GaussianIid { center, std: 2.0 };
        let pts = sample_initial(&law, 10_000, &mut rng_from_u64(5)).unwrap();
        let mean = pts.iter().fold(Point2::ZERO, |a, &p| a + p) / pts.len() as f64;
        let se = 2.0 / 100.0;
        assert!((mean.x - center.x).abs() < 5.0 * se);
        assert!((mean.y - center.y).abs() < 5.0 * se);
    }

    #[test]
    fn uniform_disk_stays_in_disk() {
        let law = InitialLaw::UniformDiskIid { center: Point2::new(1.0, 1.0), radius: 0.5 };
        let pts = sample_initial(&law, 500, &mut rng_from_u64(8)).unwrap();
        assert!(pts.iter().all(|p| (*p - Point2::new(1.0, 1.0)).norm() <= 0.5));
    }

    #[test]
    fn atom_table_parsing() {
        let text = "# weight x y\n1 -1 0\n\n3 2.5 1  # heavy\n";
        let atoms = parse_atom_table(text, Path::new("t")).unwrap();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].weight - 0.25).abs() < 1e-15);
        assert_eq!((atoms[1].x, atoms[1].y), (2.5, 1.0));
        assert!(parse_atom_table("1 2\n", Path::new("t")).is_err());
        assert!(parse_atom_table("-1 0 0\n", Path::new("t")).is_err());
        assert!(parse_atom_table("x 0 0\n", Path::new("t")).is_err());
    }

    #[test]
    fn file_atoms_two_equal_weights_split_evenly() {
        let dir = std::env::temp_dir().join(format!("kslab-atoms-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("atoms.txt");
        std::fs::write(&path, "2 -3 0\n2 3 0\n").unwrap();
        let law = InitialLaw::FileAtoms { path: path.clone(), jitter_scale: 1.0, atoms: vec![] }
            .resolve()
            .unwrap();
        let n = 4000;
        let pts = sample_initial(&law, n, &mut rng_from_u64(21)).unwrap();
        let left = pts.iter().filter(|p| (p.x + 3.0).abs() < 0.01).count();
        let right = pts.iter().filter(|p| (p.x - 3.0).abs() < 0.01).count();
        assert_eq!(left + right, n);
        // Binomial(n, 1/2): sd = sqrt(n)/2 ~ 31.6; allow 5 sd.
        let frac = left as f64 / n as f64;
        assert!((frac - 0.5).abs() < 5.0 * 0.5 / (n as f64).sqrt(), "{frac}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn points_are_identically_distributed_across_indices() {
        // i.i.d. draws followed by identical per-point post-processing: the
        // first and last index have the same law.
        let law = InitialLaw::two_atoms(2.0);
        let (mut first, mut last) = (0.0, 0.0);
        let reps = 4000;
        let mut rng = rng_from_u64(99);
        for _ in 0..reps {
            let pts = sample_initial(&law, 6, &mut rng).unwrap();
            first += f64::from(pts[0].x > 0.0);
            last += f64::from(pts[5].x > 0.0);
        }
        let se = (0.5f64 / reps as f64).sqrt();
        assert!(((first - last) / reps as f64).abs() < 5.0 * se);
    }
}
