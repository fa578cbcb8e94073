//! Dense symmetric kernels: sample covariance, its eigendecomposition, the
//! inverse or Moore–Penrose pseudo-inverse, and matrix norms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Observed `p × n` data: rows are variables, columns are observations.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    y: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(y: DMatrix<f64>) -> Result<Self> {
        if y.nrows() < 1 {
            return Err(Error::InvalidInput("data needs at least one variable".into()));
        }
        if y.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "data needs at least two observations, found {}",
                y.ncols()
            )));
        }
        if let Some(idx) = y.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % y.nrows(), idx / y.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite entry at variable {row}, observation {col}"
            )));
        }
        Ok(Self { y })
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Subtracts each variable's sample mean.
    pub fn centered(&self) -> Self {
        let mut y = self.y.clone();
        for mut row in y.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        Self { y }
    }
}

/// Which inverse `SampleStats` carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `p < n` and `S` has full rank: plain inverse `S⁻¹`.
    Invertible,
    /// `p ≥ n`: Moore–Penrose pseudo-inverse `S⁺`.
    Pseudo,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Invertible => "invertible",
            Regime::Pseudo => "pseudo",
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct SymmetricDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricDecomposition {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_columns(
            &order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>(),
        );
        Self { eigenvalues, eigenvectors }
    }

    /// `U·diag(f(λ))·U'`, symmetrised.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= f(l);
        }
        let m = &scaled * self.eigenvectors.transpose();
        (&m + m.transpose()) * 0.5
    }
}

/// Rank tolerance `p·ε·λ_max`.
pub fn rank_tolerance(p: usize, lambda_max: f64) -> f64 {
    p as f64 * f64::EPSILON * lambda_max.max(0.0)
}

/// Result of [`pseudo_inverse`].
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub tolerance: f64,
    /// Set when no eigenvalue clears the tolerance; `matrix` is then zero.
    pub degenerate: bool,
}

/// `S⁺ = U·diag(g(λ))·U'` with `g(λ) = 1/λ` above the rank tolerance, else 0.
pub fn pseudo_inverse_of(decomp: &SymmetricDecomposition) -> PseudoInverse {
    let p = decomp.eigenvalues.len();
    let lambda_max = decomp.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tolerance = rank_tolerance(p, lambda_max);
    let rank = decomp.eigenvalues.iter().filter(|&&l| l > tolerance).count();
    let matrix = decomp.reconstruct_with(|l| if l > tolerance { 1.0 / l } else { 0.0 });
    PseudoInverse {
        matrix,
        rank,
        tolerance,
        degenerate: rank == 0,
    }
}

/// Sample covariance `S = Y·Y'/n` with everything the estimators reuse.
#[derive(Debug, Clone)]
pub struct SampleStats {
    p: usize,
    n: usize,
    s: DMatrix<f64>,
    decomp: SymmetricDecomposition,
    regime: Regime,
    inverse: DMatrix<f64>,
    inverse_frobenius_sq: f64,
    inverse_trace_norm: f64,
    rank: usize,
    tolerance: f64,
}

impl SampleStats {
    /// Builds the statistics from an already formed covariance-like matrix
    /// `s` and the sample size `n` it was computed from.
    pub fn from_covariance(s: DMatrix<f64>, n: usize) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                found: s.ncols(),
            });
        }
        let p = s.nrows();
        let s = (&s + s.transpose()) * 0.5;
        let decomp = SymmetricDecomposition::new(&s);
        let pinv = pseudo_inverse_of(&decomp);
        let regime = if p < n {
            let min = decomp.eigenvalues[0];
            if !(min > pinv.tolerance) {
                return Err(Error::Singular {
                    min_eigenvalue: min,
                    tolerance: pinv.tolerance,
                });
            }
            Regime::Invertible
        } else {
            if pinv.degenerate {
                return Err(Error::DegeneratePseudoInverse);
            }
            Regime::Pseudo
        };
        let inverse = pinv.matrix;
        let inverse_frobenius_sq = inverse.dot(&inverse);
        let inverse_trace_norm = decomp
            .eigenvalues
            .iter()
            .filter(|&&l| l > pinv.tolerance)
            .map(|l| 1.0 / l)
            .sum();
        Ok(Self {
            p,
            n,
            s,
            decomp,
            regime,
            inverse,
            inverse_frobenius_sq,
            inverse_trace_norm,
            rank: pinv.rank,
            tolerance: pinv.tolerance,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Concentration ratio `p/n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.decomp.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.decomp.eigenvectors
    }

    pub fn decomposition(&self) -> &SymmetricDecomposition {
        &self.decomp
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `S⁻¹` in the invertible regime, `S⁺` otherwise.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `‖S⁻¹‖²_F` (or of `S⁺`).
    pub fn inverse_frobenius_sq(&self) -> f64 {
        self.inverse_frobenius_sq
    }

    /// `‖S⁻¹‖_tr = tr(S⁻¹)` (or of `S⁺`).
    pub fn inverse_trace_norm(&self) -> f64 {
        self.inverse_trace_norm
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `tr(S⁻¹Θ) = Σ_i u_i'Θu_i / λ_i` over eigenvalues above the rank
    /// tolerance, without touching the dense inverse.
    pub fn trace_inverse_product(&self, theta: &DMatrix<f64>) -> Result<f64> {
        if theta.nrows() != self.p || theta.ncols() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: theta.nrows(),
            });
        }
        let u = &self.decomp.eigenvectors;
        let tu = theta * u;
        let mut total = 0.0;
        for (i, &l) in self.decomp.eigenvalues.iter().enumerate() {
            if l > self.tolerance {
                total += u.column(i).dot(&tu.column(i)) / l;
            }
        }
        Ok(total)
    }
}

/// `S = Y·Y'/n` (no centring) plus eigendecomposition and (pseudo-)inverse.
///
/// `p < n` selects the plain inverse and fails with [`Error::Singular`] when
/// `S` is rank deficient; `p ≥ n` selects the pseudo-inverse.
pub fn sample_covariance(data: &DataMatrix) -> Result<SampleStats> {
    let y = data.as_matrix();
    let n = data.n();
    let s = (y * y.transpose()) / n as f64;
    SampleStats::from_covariance(s, n)
}

/// Centred sample covariance `S = Yc·Yc'/(n − 1)` with effective sample
/// size `n − 1`.
pub fn sample_covariance_centered(data: &DataMatrix) -> Result<SampleStats> {
    let centered = data.centered();
    let y = centered.as_matrix();
    let n_eff = data.n() - 1;
    let s = (y * y.transpose()) / n_eff as f64;
    SampleStats::from_covariance(s, n_eff)
}

/// Dual sample covariance `S̄ = Y'·Y/n` (`n × n`).
pub fn dual_covariance(data: &DataMatrix) -> DMatrix<f64> {
    let y = data.as_matrix();
    (y.transpose() * y) / data.n() as f64
}

/// Moore–Penrose pseudo-inverse from cached statistics.
pub fn pseudo_inverse(stats: &SampleStats) -> PseudoInverse {
    pseudo_inverse_of(stats.decomposition())
}

/// The three norms used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    /// `‖A‖²_F = tr(AA')`
    pub frobenius_sq: f64,
    /// `‖A‖_tr = tr((AA')^{1/2})`
    pub trace_norm: f64,
    /// `‖A‖₂`, the largest singular value
    pub spectral: f64,
}

/// Frobenius, trace and spectral norms. Symmetric input goes through the
/// eigendecomposition, anything else through the SVD.
pub fn norms(a: &DMatrix<f64>) -> MatrixNorms {
    let frobenius_sq = a.dot(a);
    let scale = a.abs().max();
    let symmetric = a.is_square() && (a - a.transpose()).abs().max() <= 1e-12 * scale.max(f64::MIN_POSITIVE);
    let singular: Vec<f64> = if symmetric {
        SymmetricEigen::new(a.clone()).eigenvalues.iter().map(|l| l.abs()).collect()
    } else {
        a.clone().svd(false, false).singular_values.iter().copied().collect()
    };
    MatrixNorms {
        frobenius_sq,
        trace_norm: singular.iter().sum(),
        spectral: singular.iter().copied().fold(0.0, f64::max),
    }
}

/// Inverse of a symmetric positive definite matrix through Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or_else(|| {
        let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
        Error::Singular {
            min_eigenvalue: min,
            tolerance: 0.0,
        }
    })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// `true` when `m` is symmetric within `tol` (relative to its largest entry)
/// and admits a Cholesky factorisation.
pub fn is_symmetric_positive_definite(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.abs().max();
    if (m - m.transpose()).abs().max() > tol * scale.max(f64::MIN_POSITIVE) {
        return false;
    }
    m.clone().cholesky().is_some()
}
