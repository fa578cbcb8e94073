//! Deterministic equivalents of the shrinkage functionals.
//!
//! For `c = p/n < 1` everything is closed form in the inverse spectral
//! moments. For `c > 1` the limits are driven by the solution `x` of
//!
//! ```text
//! 1/x = (c/p)·tr[(M + x·I)⁻¹]
//! ```
//!
//! with `M = Σ⁻¹` (giving `x(0)`) or `M = Σ^{-1/2}ΘΣ^{-1/2}` (giving `y(Θ)`).
//! Both are handled by one scalar solver working on the eigenvalues of `M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{ConcentrationRegime, Provenance, ShrinkageWeights, TargetMatrix};
use crate::linalg::SymmetricDecomposition;
use crate::spectral::{build_covariance, spectral_moments, CovarianceModel, SpectrumSpec};

const DAMPING: f64 = 0.5;
const MAX_ITERATIONS: usize = 10_000;
const STEP_TOLERANCE: f64 = 1e-12;
const RESIDUAL_TOLERANCE: f64 = 1e-10;
const BRACKET: (f64, f64) = (1e-12, 1e12);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    FixedPoint,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// `|1/x − (c/p)·tr[(M + xI)⁻¹]|` at the returned value.
    pub residual: f64,
    pub method: SolverMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSolution {
    pub value: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Limit quantities for one `(Σ, c)` pair. Fields not defined for the
/// regime are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitFunctionals {
    pub c: f64,
    /// Limit of `‖S⁻¹‖²_F / p` (`c < 1`).
    pub psi: Option<f64>,
    /// `x(0)` (`c > 1`); `x(0)/c` is the limit of `tr(S⁺)/p`.
    pub x0: Option<f64>,
    /// `x′(0)` (`c > 1`); `x′(0)/c` is the limit of `‖S⁺‖²_F / p`.
    pub x0_prime: Option<f64>,
    pub diagnostics: Option<SolverDiagnostics>,
}

fn check_c_below_one(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidInput(format!("c = {c} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_c_above_one(c: f64) -> Result<()> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("c = {c} must exceed 1")));
    }
    Ok(())
}

/// Limit of `‖S⁻¹‖²_F / p` for `0 < c < 1`:
/// `ψ = ∫dH/τ² / (1−c)² + c·(∫dH/τ)² / (1−c)³`.
pub fn psi_limit(spec: &SpectrumSpec, c: f64) -> Result<f64> {
    check_c_below_one(c)?;
    let m = spectral_moments(spec);
    let s = 1.0 - c;
    Ok(m.inv_second / (s * s) + c * m.inv_first * m.inv_first / (s * s * s))
}

/// Limits of the oracle intensities for `0 < c < 1`.
pub fn limit_weights_lt1(truth: &CovarianceModel, target: &TargetMatrix, c: f64) -> Result<ShrinkageWeights> {
    check_c_below_one(c)?;
    let p = truth.dim();
    if target.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.dim(),
        });
    }
    let f_prec = truth.precision_frobenius_sq();
    let tr_prec = truth.precision_trace_norm();
    let f_target = target.frobenius_sq();
    let cross = truth.precision().dot(target.matrix());
    let s = 1.0 - c;

    let numerator = f_prec * f_target - cross * cross;
    let inflated = f_prec + c / (p as f64 * s) * tr_prec * tr_prec;
    let denominator = inflated * f_target - cross * cross;
    if !(denominator > 0.0) {
        return Err(Error::DegenerateTarget {
            determinant: denominator,
            threshold: 0.0,
        });
    }
    let alpha = s * numerator / denominator;
    let beta = cross / f_target * (1.0 - alpha / s);
    Ok(ShrinkageWeights {
        alpha,
        beta,
        regime: ConcentrationRegime::CLt1,
        provenance: Provenance::AsymptoticLimit,
    })
}

/// `1/x − (c/p)·Σ 1/(μ_i + x)`
fn resolvent_gap(mu: &[f64], c: f64, x: f64) -> f64 {
    let p = mu.len() as f64;
    let sum: f64 = mu.iter().map(|m| 1.0 / (m + x)).sum();
    1.0 / x - c / p * sum
}

/// Solves `1/x = (c/p)·Σ 1/(μ_i + x)` for `x > 0` given positive `μ` and
/// `c > 1`, where the root is unique.
///
/// Damped fixed-point iteration on `x ← p / (c·Σ 1/(μ_i + x))` from
/// `mean(μ)/(c − 1)` (exact when all `μ_i` coincide); bisection over
/// `[1e-12, 1e12]` takes over if the iteration stalls or leaves `(0, ∞)`.
pub fn solve_resolvent_equation(mu: &[f64], c: f64) -> Result<FixedPointSolution> {
    check_c_above_one(c)?;
    if mu.is_empty() || mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidInput("resolvent equation needs positive μ".into()));
    }
    let p = mu.len() as f64;
    let mean = mu.iter().sum::<f64>() / p;
    let map = |x: f64| p / (c * mu.iter().map(|m| 1.0 / (m + x)).sum::<f64>());

    let mut x = mean / (c - 1.0);
    let mut converged = false;
    let mut iterations = 0;
    let mut growing_steps = 0;
    let mut last_step = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next = (1.0 - DAMPING) * x + DAMPING * map(x);
        if !(next.is_finite() && next > 0.0) {
            break;
        }
        let step = (next - x).abs();
        x = next;
        if step <= STEP_TOLERANCE * x.max(1.0) {
            converged = true;
            break;
        }
        growing_steps = if step > last_step { growing_steps + 1 } else { 0 };
        if growing_steps > 50 {
            break;
        }
        last_step = step;
    }

    if converged {
        let residual = resolvent_gap(mu, c, x).abs();
        if residual < RESIDUAL_TOLERANCE {
            return Ok(FixedPointSolution {
                value: x,
                diagnostics: SolverDiagnostics {
                    iterations,
                    residual,
                    method: SolverMethod::FixedPoint,
                },
            });
        }
    }
    bisect(mu, c, iterations)
}

fn bisect(mu: &[f64], c: f64, prior_iterations: usize) -> Result<FixedPointSolution> {
    let (mut lo, mut hi) = BRACKET;
    let g = |x: f64| resolvent_gap(mu, c, x);
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return Err(Error::NonConvergence {
            iterations: prior_iterations,
            residual: f64::NAN,
        });
    }
    let mut iterations = prior_iterations;
    for _ in 0..400 {
        iterations += 1;
        // geometric midpoint while the bracket spans decades
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let residual = g(x).abs();
    if residual < RESIDUAL_TOLERANCE {
        Ok(FixedPointSolution {
            value: x,
            diagnostics: SolverDiagnostics {
                iterations,
                residual,
                method: SolverMethod::Bisection,
            },
        })
    } else {
        Err(Error::NonConvergence { iterations, residual })
    }
}

fn precision_eigenvalues(truth: &CovarianceModel) -> Vec<f64> {
    truth.eigenvalues().iter().map(|t| 1.0 / t).collect()
}

/// `x(0)`: the root of `1/x = (c/p)·tr[(Σ⁻¹ + xI)⁻¹]` for `c > 1`.
pub fn solve_x0(truth: &CovarianceModel, c: f64) -> Result<FixedPointSolution> {
    solve_resolvent_equation(&precision_eigenvalues(truth), c)
}

/// Residual of the `x(0)` equation at `x`.
pub fn x0_residual(truth: &CovarianceModel, c: f64, x: f64) -> f64 {
    resolvent_gap(&precision_eigenvalues(truth), c, x).abs()
}

/// `x′(0) = 1 / (1/x(0)² − (c/p)·tr[(Σ⁻¹ + x(0)I)⁻²])`.
pub fn x0_prime(truth: &CovarianceModel, c: f64, x0: f64) -> Result<f64> {
    check_c_above_one(c)?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::InconsistentInput(format!("x(0) = {x0} is not positive")));
    }
    let mu = precision_eigenvalues(truth);
    let relative = resolvent_gap(&mu, c, x0).abs() * x0;
    if relative > 1e-8 {
        return Err(Error::InconsistentInput(format!(
            "x(0) = {x0} does not solve its defining equation (relative residual {relative:e})"
        )));
    }
    let p = mu.len() as f64;
    let sum: f64 = mu.iter().map(|m| 1.0 / ((m + x0) * (m + x0))).sum();
    let denominator = 1.0 / (x0 * x0) - c / p * sum;
    if !(denominator > 0.0) {
        return Err(Error::InconsistentInput(format!(
            "x'(0) denominator {denominator:e} is not positive"
        )));
    }
    Ok(1.0 / denominator)
}

/// `y(Θ)`: the root of `1/y = (c/p)·tr[(Σ^{-1/2}ΘΣ^{-1/2} + yI)⁻¹]` for
/// symmetric positive definite `Θ` and `c > 1`.
///
/// The paired limit `y(Θ)/c` for `tr(ΘS⁺)/p` holds for `Θ = I`; for other
/// `Θ` with non-scalar `Σ` it does not track the finite-sample trace.
pub fn solve_y(truth: &CovarianceModel, theta: &DMatrix<f64>, c: f64) -> Result<FixedPointSolution> {
    check_c_above_one(c)?;
    let p = truth.dim();
    if theta.nrows() != p || theta.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: theta.nrows(),
        });
    }
    let scale = theta.abs().max();
    if (theta - theta.transpose()).abs().max() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput("Θ must be symmetric".into()));
    }
    let half = truth.power(-0.5);
    let m = &half * theta * &half;
    let m = (&m + m.transpose()) * 0.5;
    let mu: Vec<f64> = if truth.is_diagonal() && is_diagonal(theta) {
        m.diagonal().iter().copied().collect()
    } else {
        SymmetricDecomposition::new(&m).eigenvalues.iter().copied().collect()
    };
    if mu.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("Θ must be positive definite".into()));
    }
    solve_resolvent_equation(&mu, c)
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(idx, v)| {
        let (i, j) = (idx % m.nrows(), idx / m.nrows());
        i == j || *v == 0.0
    })
}

/// Rank-one closed form `y(ξη′) = η′Σ⁻¹ξ / (c − 1)`; the asserted limit of
/// `η′S⁺ξ` is this divided by `c`.
pub fn y_rank_one(truth: &CovarianceModel, xi: &DVector<f64>, eta: &DVector<f64>, c: f64) -> Result<f64> {
    check_c_above_one(c)?;
    let p = truth.dim();
    for v in [xi, eta] {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: v.len(),
            });
        }
    }
    Ok(eta.dot(&(truth.precision() * xi)) / (c - 1.0))
}

/// Limits of the oracle intensities for `c > 1`.
///
/// Obtained from the finite-sample oracle formulas with
/// `tr(ΘS⁺) ≈ (p/c)·y(Θ)` and `‖S⁺‖²_F ≈ (p/c)·x′(0)`:
///
/// ```text
/// α* = [y(Σ⁻¹)‖Π₀‖²_F − y(Π₀)·tr(Σ⁻¹Π₀)] / [x′(0)‖Π₀‖²_F − (p/c)·y(Π₀)²]
/// β* = [tr(Σ⁻¹Π₀)·x′(0) − (p/c)·y(Σ⁻¹)y(Π₀)] / [x′(0)‖Π₀‖²_F − (p/c)·y(Π₀)²]
/// ```
///
/// Exact for `Σ = σI`; inherits the limitation noted on [`solve_y`] otherwise.
pub fn limit_weights_gt1(truth: &CovarianceModel, target: &TargetMatrix, c: f64) -> Result<ShrinkageWeights> {
    check_c_above_one(c)?;
    let p = truth.dim();
    if target.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.dim(),
        });
    }
    let x0 = solve_x0(truth, c)?.value;
    let xp = x0_prime(truth, c, x0)?;
    let y_prec = solve_y(truth, truth.precision(), c)?.value;
    let y_target = solve_y(truth, target.matrix(), c)?.value;
    let f_target = target.frobenius_sq();
    let cross = truth.precision().dot(target.matrix());
    let scale = p as f64 / c;

    let denominator = xp * f_target - scale * y_target * y_target;
    if !(denominator.abs() > 1e-300) {
        return Err(Error::DegenerateTarget {
            determinant: denominator,
            threshold: 0.0,
        });
    }
    let alpha = (y_prec * f_target - y_target * cross) / denominator;
    let beta = (cross * xp - scale * y_prec * y_target) / denominator;
    Ok(ShrinkageWeights {
        alpha,
        beta,
        regime: ConcentrationRegime::CGt1,
        provenance: Provenance::AsymptoticLimit,
    })
}

/// All limit functionals defined for `spec` at concentration `c`, using a
/// `p`-dimensional realisation for the `c > 1` equations.
pub fn limit_functionals(spec: &SpectrumSpec, p: usize, c: f64) -> Result<LimitFunctionals> {
    if c == 1.0 {
        return Err(Error::InvalidInput("c = 1 has no limit theory".into()));
    }
    if c < 1.0 {
        return Ok(LimitFunctionals {
            c,
            psi: Some(psi_limit(spec, c)?),
            x0: None,
            x0_prime: None,
            diagnostics: None,
        });
    }
    let truth = build_covariance(spec, p, None)?;
    let sol = solve_x0(&truth, c)?;
    let xp = x0_prime(&truth, c, sol.value)?;
    Ok(LimitFunctionals {
        c,
        psi: None,
        x0: Some(sol.value),
        x0_prime: Some(xp),
        diagnostics: Some(sol.diagnostics),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::three_block_spectrum;
    use approx::assert_relative_eq;

    fn scalar_model(sigma: f64, p: usize) -> CovarianceModel {
        build_covariance(&SpectrumSpec::point_mass(sigma).unwrap(), p, None).unwrap()
    }

    #[test]
    fn psi_examples() {
        let identity = SpectrumSpec::point_mass(1.0).unwrap();
        assert_relative_eq!(psi_limit(&identity, 0.5).unwrap(), 8.0, epsilon = 1e-12);
        assert_relative_eq!(psi_limit(&SpectrumSpec::point_mass(2.0).unwrap(), 0.5).unwrap(), 2.0, epsilon = 1e-12);
        let m = three_block_spectrum().moments();
        assert_relative_eq!(psi_limit(&three_block_spectrum(), 1e-9).unwrap(), m.inv_second, epsilon = 1e-8);
        assert!(psi_limit(&identity, 1.0).is_err());
        assert!(psi_limit(&identity, 0.0).is_err());
    }

    #[test]
    fn x0_closed_forms() {
        assert_relative_eq!(solve_x0(&scalar_model(1.0, 10), 2.0).unwrap().value, 1.0, epsilon = 1e-10);
        assert_relative_eq!(solve_x0(&scalar_model(2.0, 10), 1.5).unwrap().value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn x0_prime_identity() {
        let truth = scalar_model(1.0, 10);
        let x0 = solve_x0(&truth, 2.0).unwrap().value;
        assert_relative_eq!(x0_prime(&truth, 2.0, x0).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn x0_prime_rejects_non_solution() {
        let truth = scalar_model(1.0, 10);
        assert!(matches!(x0_prime(&truth, 2.0, 3.0), Err(Error::InconsistentInput(_))));
    }

    #[test]
    fn three_block_x0_against_bisection_oracle() {
        let truth = build_covariance(&three_block_spectrum(), 60, None).unwrap();
        let sol = solve_x0(&truth, 1.5).unwrap();
        assert!(sol.diagnostics.residual < 1e-10);
        // independent bracketing oracle directly on the trace equation
        let g = |x: f64| {
            1.0 / x - 1.5 / 60.0 * truth.eigenvalues().iter().map(|t| 1.0 / (1.0 / t + x)).sum::<f64>()
        };
        let (mut lo, mut hi) = (1e-6, 1e6);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(sol.value, 0.5 * (lo + hi), epsilon = 1e-10);
    }

    #[test]
    fn y_closed_forms() {
        let truth = build_covariance(&three_block_spectrum(), 20, None).unwrap();
        let y = solve_y(&truth, truth.sigma(), 2.0).unwrap().value;
        assert_relative_eq!(y, 1.0, epsilon = 1e-10);
        let truth = scalar_model(2.0, 8);
        let y = solve_y(&truth, &DMatrix::identity(8, 8), 3.0).unwrap().value;
        assert_relative_eq!(y, 0.5 / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn y_rejects_indefinite_theta() {
        let truth = scalar_model(1.0, 2);
        let theta = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(solve_y(&truth, &theta, 2.0).is_err());
    }

    #[test]
    fn rank_one_closed_form() {
        let truth = build_covariance(&three_block_spectrum(), 5, None).unwrap();
        let e1 = DVector::from_fn(5, |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert_relative_eq!(y_rank_one(&truth, &e1, &e1, 1.5).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn limit_weights_true_target() {
        let truth = build_covariance(&three_block_spectrum(), 30, None).unwrap();
        let target = TargetMatrix::true_precision(&truth);
        let w = limit_weights_lt1(&truth, &target, 0.3).unwrap();
        assert_eq!((w.alpha, w.beta), (0.0, 1.0));
        let scalar = scalar_model(0.5, 30);
        let w = limit_weights_gt1(&scalar, &TargetMatrix::true_precision(&scalar), 2.0).unwrap();
        assert_eq!((w.alpha, w.beta), (0.0, 1.0));
    }

    #[test]
    fn limit_weights_scalar_identity_target() {
        for &sigma in &[0.5, 2.0] {
            let truth = scalar_model(sigma, 40);
            let w = limit_weights_lt1(&truth, &TargetMatrix::identity_over_p(40), 0.25).unwrap();
            assert!(w.alpha.abs() < 1e-12);
            assert_relative_eq!(w.beta, 40.0 / sigma, epsilon = 1e-10);
            let w = limit_weights_gt1(&truth, &TargetMatrix::identity_over_p(40), 1.5).unwrap();
            assert!(w.alpha.abs() < 1e-9);
            assert_relative_eq!(w.beta / 40.0, 1.0 / sigma, epsilon = 1e-9);
        }
    }

    #[test]
    fn three_block_limit_alpha_in_range() {
        let truth = build_covariance(&three_block_spectrum(), 60, None).unwrap();
        let c = 1.0 / 3.0;
        let w = limit_weights_lt1(&truth, &TargetMatrix::identity_over_p(60), c).unwrap();
        // direct evaluation: ‖Σ⁻¹‖² = 12(1) + 24/9 + 24/100, tr = 12 + 8 + 2.4, ‖Π₀‖² = 1/60
        let f = 12.0 + 24.0 / 9.0 + 0.24;
        let tr = 22.4;
        let cross = tr / 60.0;
        let expected = (1.0 - c) * (f / 60.0 - cross * cross)
            / ((f + c / (60.0 * (1.0 - c)) * tr * tr) / 60.0 - cross * cross);
        assert_relative_eq!(w.alpha, expected, epsilon = 1e-12);
        assert!(w.alpha > 0.0 && w.alpha < 1.0 - c);
    }

    #[test]
    fn functionals_dispatch() {
        let id = SpectrumSpec::point_mass(1.0).unwrap();
        let lt = limit_functionals(&id, 100, 0.5).unwrap();
        assert_relative_eq!(lt.psi.unwrap(), 8.0, epsilon = 1e-12);
        let gt = limit_functionals(&id, 100, 2.0).unwrap();
        assert_relative_eq!(gt.x0.unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(gt.x0_prime.unwrap(), 2.0, epsilon = 1e-9);
        assert!(limit_functionals(&id, 100, 1.0).is_err());
    }
}
