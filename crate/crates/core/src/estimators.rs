//! Precision-matrix estimators.
//!
//! Every shrinkage estimator here has the form `α·S⁻¹ + β·Π₀` (with `S⁺` in
//! place of `S⁻¹` when `p > n`). The oracle variants pick `(α, β)` by
//! minimising `‖α·S⁻¹ + β·Π₀ − Σ⁻¹‖²_F` with the true `Σ⁻¹` in hand; the
//! bona fide variant replaces the unknown functionals of `Σ⁻¹` with
//! consistent plug-ins ([`theta_hat`], [`rho_hat`]).
//!
//! The target may itself be random as long as it is independent of the data
//! used to form `S`; nothing here can check that.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric_positive_definite, spd_inverse, Regime, SampleStats};
use crate::spectral::CovarianceModel;

/// Plain-inverse operations refuse `p/n` above this value.
pub const NEAR_SINGULAR_LIMIT: f64 = 0.95;

/// Relative threshold on `‖S⁻¹‖²_F‖Π₀‖²_F − tr(S⁻¹Π₀)²`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const TARGET_SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationRegime {
    /// `p/n < 1`
    CLt1,
    /// `p/n > 1`
    CGt1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    BonaFide,
    AsymptoticLimit,
}

/// Shrinkage intensities `(α, β)` and where they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageWeights {
    pub alpha: f64,
    pub beta: f64,
    pub regime: ConcentrationRegime,
    pub provenance: Provenance,
}

/// A symmetric positive definite shrinkage target with cached norms.
#[derive(Debug, Clone)]
pub struct TargetMatrix {
    matrix: DMatrix<f64>,
    frobenius_sq: f64,
    trace_norm: f64,
}

impl TargetMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !is_symmetric_positive_definite(&matrix, TARGET_SYMMETRY_TOLERANCE) {
            return Err(Error::InvalidInput(
                "target must be symmetric positive definite".into(),
            ));
        }
        let frobenius_sq = matrix.dot(&matrix);
        let trace_norm = matrix.trace();
        Ok(Self {
            matrix,
            frobenius_sq,
            trace_norm,
        })
    }

    /// `Π₀ = I/p`
    pub fn identity_over_p(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p) / p as f64).expect("I/p is positive definite")
    }

    /// `Π₀ = Σ⁻¹`, the true precision of `model`.
    pub fn true_precision(model: &CovarianceModel) -> Self {
        Self::new(model.precision().clone()).expect("model precision is positive definite")
    }

    /// `Π₀ = Σ₀⁻¹` for a prior covariance model `Σ₀`.
    pub fn inverse_of(prior: &CovarianceModel) -> Self {
        Self::true_precision(prior)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.matrix * factor)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `‖Π₀‖²_F`
    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }

    /// `‖Π₀‖_tr = tr(Π₀)`
    pub fn trace_norm(&self) -> f64 {
        self.trace_norm
    }
}

/// Stable estimator identifiers shared by the CLI and result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    SampleInv,
    SamplePinv,
    OlsePrecision,
    OlsePrecisionOracle,
    OlseCovInv,
    EvOracle,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 6] = [
        EstimatorId::SampleInv,
        EstimatorId::SamplePinv,
        EstimatorId::OlsePrecision,
        EstimatorId::OlsePrecisionOracle,
        EstimatorId::OlseCovInv,
        EstimatorId::EvOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::SampleInv => "sample_inv",
            EstimatorId::SamplePinv => "sample_pinv",
            EstimatorId::OlsePrecision => "olse_precision",
            EstimatorId::OlsePrecisionOracle => "olse_precision_oracle",
            EstimatorId::OlseCovInv => "olse_cov_inv",
            EstimatorId::EvOracle => "ev_oracle",
        }
    }

    /// Whether the estimator is parameterised by a shrinkage target.
    pub fn uses_target(self) -> bool {
        matches!(
            self,
            EstimatorId::OlsePrecision | EstimatorId::OlsePrecisionOracle | EstimatorId::OlseCovInv
        )
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator id {s:?}")))
    }
}

/// An estimated precision matrix with its intensities, when it has any.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    pub matrix: DMatrix<f64>,
    pub weights: Option<ShrinkageWeights>,
    pub estimator: EstimatorId,
}

fn concentration(stats: &SampleStats) -> ConcentrationRegime {
    match stats.regime() {
        Regime::Invertible => ConcentrationRegime::CLt1,
        Regime::Pseudo => ConcentrationRegime::CGt1,
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Invertible regime with `p/n` outside the band near one.
fn require_invertible(stats: &SampleStats) -> Result<()> {
    if stats.regime() != Regime::Invertible {
        return Err(Error::RegimeMismatch {
            expected: "invertible (p < n)",
        });
    }
    let ratio = stats.ratio();
    if ratio > NEAR_SINGULAR_LIMIT {
        return Err(Error::NearSingularRegime {
            ratio,
            limit: NEAR_SINGULAR_LIMIT,
        });
    }
    Ok(())
}

fn require_pseudo(stats: &SampleStats) -> Result<()> {
    if stats.regime() != Regime::Pseudo {
        return Err(Error::RegimeMismatch {
            expected: "pseudo-inverse (p >= n)",
        });
    }
    Ok(())
}

/// `‖A‖²_F‖Π₀‖²_F − tr(AΠ₀)²`, rejected when it is a negligible fraction of
/// the first product.
fn hessian_determinant(inverse_frob_sq: f64, target_frob_sq: f64, cross: f64) -> Result<f64> {
    let scale = inverse_frob_sq * target_frob_sq;
    let det = scale - cross * cross;
    let threshold = DEGENERACY_THRESHOLD * scale;
    if !(det > threshold) {
        return Err(Error::DegenerateTarget {
            determinant: det,
            threshold,
        });
    }
    Ok(det)
}

fn compose(alpha: f64, inverse: &DMatrix<f64>, beta: f64, target: &DMatrix<f64>) -> DMatrix<f64> {
    inverse * alpha + target * beta
}

fn oracle_weights(stats: &SampleStats, truth: &CovarianceModel, target: &TargetMatrix) -> Result<ShrinkageWeights> {
    check_dim(stats.p(), truth.dim())?;
    check_dim(stats.p(), target.dim())?;
    let inv = stats.inverse();
    let precision = truth.precision();
    let pi0 = target.matrix();

    let f_inv = stats.inverse_frobenius_sq();
    let f_target = target.frobenius_sq();
    // all three are traces of products of symmetric matrices, i.e. entrywise dots
    let inv_truth = inv.dot(precision);
    let inv_target = inv.dot(pi0);
    let truth_target = precision.dot(pi0);

    let det = hessian_determinant(f_inv, f_target, inv_target)?;
    let alpha = (inv_truth * f_target - truth_target * inv_target) / det;
    let beta = (truth_target * f_inv - inv_truth * inv_target) / det;
    Ok(ShrinkageWeights {
        alpha,
        beta,
        regime: concentration(stats),
        provenance: Provenance::Oracle,
    })
}

/// Oracle intensities for `p < n`, minimising the Frobenius loss exactly.
pub fn oracle_olse_lt1(stats: &SampleStats, truth: &CovarianceModel, target: &TargetMatrix) -> Result<PrecisionEstimate> {
    require_invertible(stats)?;
    let weights = oracle_weights(stats, truth, target)?;
    Ok(PrecisionEstimate {
        matrix: compose(weights.alpha, stats.inverse(), weights.beta, target.matrix()),
        weights: Some(weights),
        estimator: EstimatorId::OlsePrecisionOracle,
    })
}

/// Oracle intensities for `p ≥ n`, with `S⁺` in place of `S⁻¹`.
pub fn oracle_olse_gt1(stats: &SampleStats, truth: &CovarianceModel, target: &TargetMatrix) -> Result<PrecisionEstimate> {
    require_pseudo(stats)?;
    let weights = oracle_weights(stats, truth, target)?;
    Ok(PrecisionEstimate {
        matrix: compose(weights.alpha, stats.inverse(), weights.beta, target.matrix()),
        weights: Some(weights),
        estimator: EstimatorId::OlsePrecisionOracle,
    })
}

/// Regime-dispatching oracle.
pub fn oracle_olse(stats: &SampleStats, truth: &CovarianceModel, target: &TargetMatrix) -> Result<PrecisionEstimate> {
    match stats.regime() {
        Regime::Invertible => oracle_olse_lt1(stats, truth, target),
        Regime::Pseudo => oracle_olse_gt1(stats, truth, target),
    }
}

/// Consistent estimator of `tr(Σ⁻¹Θ)`: `(1 − p/n)·tr(S⁻¹Θ)`.
pub fn theta_hat(stats: &SampleStats, theta: &DMatrix<f64>) -> Result<f64> {
    require_invertible(stats)?;
    Ok((1.0 - stats.ratio()) * stats.trace_inverse_product(theta)?)
}

/// Consistent estimator of `‖Σ⁻¹‖²_F / p`:
/// `((1 − p/n)²/p)·‖S⁻¹‖²_F − ((1 − p/n)/(p·n))·‖S⁻¹‖²_tr`.
pub fn rho_hat(stats: &SampleStats) -> Result<f64> {
    require_invertible(stats)?;
    let p = stats.p() as f64;
    let n = stats.n() as f64;
    let shrink = 1.0 - p / n;
    let tr = stats.inverse_trace_norm();
    Ok(shrink * shrink / p * stats.inverse_frobenius_sq() - shrink / (p * n) * tr * tr)
}

/// Feasible optimal linear shrinkage estimator for `p < n`.
///
/// `α̂ = 1 − p/n − (‖S⁻¹‖²_tr‖Π₀‖²_F / n) / (‖S⁻¹‖²_F‖Π₀‖²_F − tr(S⁻¹Π₀)²)`,
/// `β̂ = (tr(S⁻¹Π₀)/‖Π₀‖²_F)·(1 − p/n − α̂)`.
///
/// With `clamp` set, `α̂` is projected onto `[0, 1 − p/n]` before `β̂` is
/// formed; otherwise the raw values are reported.
pub fn bona_fide_olse(stats: &SampleStats, target: &TargetMatrix, clamp: bool) -> Result<PrecisionEstimate> {
    require_invertible(stats)?;
    check_dim(stats.p(), target.dim())?;
    let ratio = stats.ratio();
    let n = stats.n() as f64;
    let f_inv = stats.inverse_frobenius_sq();
    let f_target = target.frobenius_sq();
    let tr_inv = stats.inverse_trace_norm();
    let inv_target = stats.inverse().dot(target.matrix());

    let det = hessian_determinant(f_inv, f_target, inv_target)?;
    let mut alpha = 1.0 - ratio - (tr_inv * tr_inv * f_target / n) / det;
    if clamp {
        alpha = alpha.clamp(0.0, 1.0 - ratio);
    }
    let beta = inv_target / f_target * (1.0 - ratio - alpha);
    let weights = ShrinkageWeights {
        alpha,
        beta,
        regime: ConcentrationRegime::CLt1,
        provenance: Provenance::BonaFide,
    };
    Ok(PrecisionEstimate {
        matrix: compose(alpha, stats.inverse(), beta, target.matrix()),
        weights: Some(weights),
        estimator: EstimatorId::OlsePrecision,
    })
}

/// Consistent estimator of `σ⁻¹` when `Σ = σI` and `p > n`:
/// `(p/n)·((p/n − 1)/p)·tr(S⁺)`.
pub fn sigma_inv_hat_identity_case(stats: &SampleStats) -> Result<f64> {
    require_pseudo(stats)?;
    if stats.p() <= stats.n() {
        return Err(Error::RegimeMismatch {
            expected: "strictly p > n",
        });
    }
    let c = stats.ratio();
    Ok(c * (c - 1.0) / stats.p() as f64 * stats.inverse_trace_norm())
}

/// `σ̂⁻¹·I`, the limit of the oracle estimator with `Π₀ = I/p` when `Σ = σI`
/// and `p > n`.
pub fn scalar_identity_estimate(stats: &SampleStats) -> Result<PrecisionEstimate> {
    let s = sigma_inv_hat_identity_case(stats)?;
    let p = stats.p();
    Ok(PrecisionEstimate {
        matrix: DMatrix::identity(p, p) * s,
        weights: Some(ShrinkageWeights {
            alpha: 0.0,
            beta: s * p as f64,
            regime: ConcentrationRegime::CGt1,
            provenance: Provenance::BonaFide,
        }),
        estimator: EstimatorId::OlsePrecision,
    })
}

/// The unshrunk baseline: `S⁻¹` or `S⁺` depending on the regime.
pub fn sample_inverse(stats: &SampleStats) -> PrecisionEstimate {
    PrecisionEstimate {
        matrix: stats.inverse().clone(),
        weights: None,
        estimator: match stats.regime() {
            Regime::Invertible => EstimatorId::SampleInv,
            Regime::Pseudo => EstimatorId::SamplePinv,
        },
    }
}

/// Linear shrinkage estimator of the covariance matrix and its inverse.
#[derive(Debug, Clone)]
pub struct CovarianceOlse {
    pub covariance: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub weights: ShrinkageWeights,
}

/// Covariance shrinkage `α̃·S + β̃·Σ₀` with
/// `α̃ = 1 − (‖S‖²_tr‖Σ₀‖²_F / n) / (‖S‖²_F‖Σ₀‖²_F − tr(SΣ₀)²)` and
/// `β̃ = (tr(SΣ₀)/‖Σ₀‖²_F)(1 − α̃)`, inverted through Cholesky.
pub fn olse_covariance(stats: &SampleStats, target_cov: &TargetMatrix) -> Result<CovarianceOlse> {
    check_dim(stats.p(), target_cov.dim())?;
    let s = stats.covariance();
    let sigma0 = target_cov.matrix();
    let n = stats.n() as f64;
    let f_s = s.dot(s);
    let f_target = target_cov.frobenius_sq();
    let tr_s = s.trace();
    let cross = s.dot(sigma0);

    let det = hessian_determinant(f_s, f_target, cross)?;
    let alpha = 1.0 - (tr_s * tr_s * f_target / n) / det;
    let beta = cross / f_target * (1.0 - alpha);
    let covariance = compose(alpha, s, beta, sigma0);
    let inverse = spd_inverse(&covariance)?;
    Ok(CovarianceOlse {
        covariance,
        inverse,
        weights: ShrinkageWeights {
            alpha,
            beta,
            regime: concentration(stats),
            provenance: Provenance::BonaFide,
        },
    })
}

/// The inverted covariance shrinkage estimator as a precision estimate.
pub fn olse_covariance_inverse(stats: &SampleStats, target_cov: &TargetMatrix) -> Result<PrecisionEstimate> {
    let olse = olse_covariance(stats, target_cov)?;
    Ok(PrecisionEstimate {
        matrix: olse.inverse,
        weights: Some(olse.weights),
        estimator: EstimatorId::OlseCovInv,
    })
}

/// `U·diag(U'·P·U)·U'`: the best Frobenius approximation of `P` among
/// matrices sharing the eigenvectors `U`.
pub fn equivariant_projection(u: &DMatrix<f64>, precision: &DMatrix<f64>) -> DMatrix<f64> {
    let pu = precision * u;
    let mut scaled = u.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        let a = u.column(i).dot(&pu.column(i));
        col *= a;
    }
    let m = &scaled * u.transpose();
    (&m + m.transpose()) * 0.5
}

/// Oracle rotation-equivariant estimator built on the sample eigenvectors.
pub fn oracle_equivariant(stats: &SampleStats, truth: &CovarianceModel) -> Result<PrecisionEstimate> {
    check_dim(stats.p(), truth.dim())?;
    Ok(PrecisionEstimate {
        matrix: equivariant_projection(stats.eigenvectors(), truth.precision()),
        weights: None,
        estimator: EstimatorId::EvOracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_covariance, SpectrumSpec};
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    /// Stats whose `S⁻¹` is `diag(1, 3)`.
    fn diag_stats(n: usize) -> SampleStats {
        SampleStats::from_covariance(diag(&[1.0, 1.0 / 3.0]), n).unwrap()
    }

    #[test]
    fn theta_hat_hand_value() {
        let stats = diag_stats(100);
        let v = theta_hat(&stats, &(DMatrix::identity(2, 2) * 0.5)).unwrap();
        assert_relative_eq!(v, 1.96, epsilon = 1e-13);
    }

    #[test]
    fn theta_hat_matches_dense_trace() {
        let stats = diag_stats(1_000_000);
        let theta = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let plain = stats.inverse().dot(&theta);
        let v = theta_hat(&stats, &theta).unwrap();
        assert_relative_eq!(v, plain * (1.0 - 2e-6), epsilon = 1e-12);
    }

    #[test]
    fn rho_hat_hand_value() {
        let v = rho_hat(&diag_stats(10)).unwrap();
        assert_relative_eq!(v, 2.56, epsilon = 1e-13);
    }

    #[test]
    fn rho_hat_large_n_tends_to_plain_norm() {
        let v = rho_hat(&diag_stats(100_000_000)).unwrap();
        assert_relative_eq!(v, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn bona_fide_hand_values() {
        let est = bona_fide_olse(&diag_stats(100), &TargetMatrix::identity_over_p(2), false).unwrap();
        let w = est.weights.unwrap();
        assert_relative_eq!(w.alpha, 0.90, epsilon = 1e-12);
        assert_relative_eq!(w.beta, 0.32, epsilon = 1e-12);
        assert_eq!(w.provenance, Provenance::BonaFide);
        let expected = diag(&[1.0, 3.0]) * w.alpha + DMatrix::identity(2, 2) * (0.5 * w.beta);
        assert_relative_eq!(est.matrix, expected, epsilon = 1e-12);
    }

    #[test]
    fn bona_fide_clamp_projects_alpha() {
        // eigenvalues of S⁻¹ almost equal: raw α̂ goes negative
        let stats = SampleStats::from_covariance(diag(&[1.0, 1.0 / 1.01]), 4).unwrap();
        let target = TargetMatrix::identity_over_p(2);
        let raw = bona_fide_olse(&stats, &target, false).unwrap().weights.unwrap();
        assert!(raw.alpha < 0.0);
        let clamped = bona_fide_olse(&stats, &target, true).unwrap().weights.unwrap();
        assert_eq!(clamped.alpha, 0.0);
        assert_relative_eq!(clamped.beta, stats.inverse().dot(target.matrix()) / target.frobenius_sq() * 0.5);
    }

    #[test]
    fn degenerate_target_detected() {
        let stats = diag_stats(100);
        let target = TargetMatrix::new(stats.inverse().clone()).unwrap();
        assert!(matches!(
            bona_fide_olse(&stats, &target, false),
            Err(Error::DegenerateTarget { .. })
        ));
    }

    #[test]
    fn regime_guards() {
        let stats = SampleStats::from_covariance(diag(&[1.0, 2.0]), 2).unwrap();
        assert_eq!(stats.regime(), Regime::Pseudo);
        assert!(matches!(rho_hat(&stats), Err(Error::RegimeMismatch { .. })));
        let near = SampleStats::from_covariance(diag(&[1.0; 20]), 21).unwrap();
        assert!(matches!(
            bona_fide_olse(&near, &TargetMatrix::identity_over_p(20), false),
            Err(Error::NearSingularRegime { .. })
        ));
        assert!(matches!(
            sigma_inv_hat_identity_case(&diag_stats(10)),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn oracle_hand_values_p2() {
        // S⁻¹ = diag(2, 0.5), Σ = I, Π₀ = I/2:
        // ‖S⁻¹‖² = 4.25, tr(S⁻¹Π₀) = 1.25, ‖Π₀‖² = 0.5, tr(S⁻¹Σ⁻¹) = 2.5, tr(Σ⁻¹Π₀) = 1
        // det = 4.25·0.5 − 1.5625 = 0.5625
        // α = (2.5·0.5 − 1·1.25)/det = 0, β = (1·4.25 − 2.5·1.25)/det = 2
        let stats = SampleStats::from_covariance(diag(&[0.5, 2.0]), 10).unwrap();
        let truth = build_covariance(&SpectrumSpec::point_mass(1.0).unwrap(), 2, None).unwrap();
        let w = oracle_olse_lt1(&stats, &truth, &TargetMatrix::identity_over_p(2))
            .unwrap()
            .weights
            .unwrap();
        assert_relative_eq!(w.alpha, 0.0, epsilon = 1e-14);
        assert_relative_eq!(w.beta, 2.0, epsilon = 1e-14);

        // Π₀ = diag(1, 0.25): ‖Π₀‖² = 1.0625, tr(S⁻¹Π₀) = 2.125, tr(Σ⁻¹Π₀) = 1.25
        // det = 4.25·1.0625 − 2.125² = 0
        // degenerate: S⁻¹ = 2·Π₀
        let target = TargetMatrix::from_diagonal(&[1.0, 0.25]).unwrap();
        assert!(oracle_olse_lt1(&stats, &truth, &target).is_err());

        // Π₀ = diag(1, 2): ‖Π₀‖² = 5, tr(S⁻¹Π₀) = 3, tr(Σ⁻¹Π₀) = 3
        // det = 21.25 − 9 = 12.25, α = (2.5·5 − 3·3)/12.25 = 3.5/12.25, β = (3·4.25 − 2.5·3)/12.25 = 5.25/12.25
        let target = TargetMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let w = oracle_olse_lt1(&stats, &truth, &target).unwrap().weights.unwrap();
        assert_relative_eq!(w.alpha, 3.5 / 12.25, epsilon = 1e-14);
        assert_relative_eq!(w.beta, 5.25 / 12.25, epsilon = 1e-14);
    }

    #[test]
    fn olse_covariance_hand_values() {
        // S = diag(1, 2), Σ₀ = I, n = 50: ‖S‖²_tr/n·‖Σ₀‖² = 9/50·2 = 0.36,
        // det = 5·2 − 9 = 1, α̃ = 0.64, β̃ = 3/2·0.36 = 0.54
        let stats = SampleStats::from_covariance(diag(&[1.0, 2.0]), 50).unwrap();
        let olse = olse_covariance(&stats, &TargetMatrix::new(DMatrix::identity(2, 2)).unwrap()).unwrap();
        assert_relative_eq!(olse.weights.alpha, 0.64, epsilon = 1e-13);
        assert_relative_eq!(olse.weights.beta, 0.54, epsilon = 1e-13);
        assert_relative_eq!(olse.covariance, diag(&[1.18, 1.82]), epsilon = 1e-13);
        let prod = &olse.covariance * &olse.inverse;
        assert!((prod - DMatrix::identity(2, 2)).abs().max() < 1e-8);
    }

    #[test]
    fn olse_covariance_large_n_returns_sample() {
        let stats = SampleStats::from_covariance(diag(&[1.0, 2.0]), 1_000_000_000).unwrap();
        let olse = olse_covariance(&stats, &TargetMatrix::new(DMatrix::identity(2, 2)).unwrap()).unwrap();
        // 1 − α̃ = (tr S)²‖I‖² / (n·(‖S‖²‖I‖² − tr(S)²)) = 18/n
        assert_relative_eq!(1.0 - olse.weights.alpha, 18e-9, max_relative = 1e-6);
        assert_relative_eq!(olse.covariance, diag(&[1.0, 2.0]), epsilon = 1e-7);
    }

    #[test]
    fn equivariant_commuting_case_is_exact() {
        let u = DMatrix::identity(3, 3);
        let p = diag(&[1.0, 0.5, 0.1]);
        assert_eq!(equivariant_projection(&u, &p), p);
    }

    #[test]
    fn equivariant_45_degree_rotation() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        let est = equivariant_projection(&u, &diag(&[1.0, 3.0]));
        assert_relative_eq!(est, DMatrix::identity(2, 2) * 2.0, epsilon = 1e-14);
    }

    #[test]
    fn estimator_ids_round_trip() {
        for id in EstimatorId::ALL {
            assert_eq!(id.as_str().parse::<EstimatorId>().unwrap(), id);
        }
        assert!("nope".parse::<EstimatorId>().is_err());
    }

    #[test]
    fn target_validation() {
        assert!(TargetMatrix::new(diag(&[1.0, -1.0])).is_err());
        assert!(TargetMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        let t = TargetMatrix::identity_over_p(4);
        assert_relative_eq!(t.frobenius_sq(), 0.25);
        assert_relative_eq!(t.trace_norm(), 1.0);
    }
}
