//! Simulation and verification toolkit for the planar Keller-Segel particle
//! system
//!
//! ```text
//! dX^i = dB^i + (theta / N) * sum_j K(X^i - X^j) dt,    K(x) = -x / |x|^2,  K(0) = 0
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: interaction kernel, cluster statistics, barycentre inequality
//!   and the `G` functional.
//! - [`initializers`]: exchangeable initial configurations.
//! - [`dynamics`]: tamed adaptive Euler-Maruyama integration with cluster
//!   collapse detection.
//! - [`diagnostics`]: estimators for the exact finite-N identities (dispersion
//!   drift, quadratic variation, pair moments, explosion times).
//! - [`empirical_measure`]: weak metric, Hoelder modulus and weak-solution
//!   residual.
//! - [`bessel`]: squared Bessel reference simulator used as an oracle.
//! - [`config`] and [`seeding`]: run configuration and replica seed derivation.

pub mod bessel;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod empirical_measure;
pub mod geometry;
pub mod initializers;
pub mod seeding;
pub mod stats;

pub use geometry::{ClusterIndexSet, ExtendedReal, Point2};
