//! Linear shrinkage estimation of large-dimensional precision matrices.
//!
//! The sample inverse `S⁻¹` (or the Moore–Penrose pseudo-inverse `S⁺` when
//! `p > n`) is shrunk directly towards a positive definite target `Π₀`:
//!
//! ```text
//! Π̂ = α·S⁻¹ + β·Π₀
//! ```
//!
//! with intensities chosen to minimise the Frobenius loss `‖Π̂ − Σ⁻¹‖²_F`.
//! The crate provides the oracle intensities, the feasible (bona fide)
//! estimator for `p < n`, the random-matrix deterministic equivalents those
//! intensities converge to, two benchmark estimators, and a Monte Carlo
//! harness that reports PRIAL curves.
//!
//! Module map:
//! - [`spectral`]: population covariance models built from discrete spectra.
//! - [`linalg`]: sample covariance, eigendecomposition, (pseudo-)inverse, norms.
//! - [`estimators`]: every precision estimator and the consistent plug-ins.
//! - [`asymptotics`]: limit functionals and the scalar fixed-point solvers.
//! - [`simulation`]: data generation, experiment configs and the replication engine.
//! - [`metrics`]: Frobenius loss, PRIAL and report aggregation.
//! - [`io`]: config files, matrix files and result CSVs.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod simulation;
pub mod spectral;

pub use error::{Error, Result};
