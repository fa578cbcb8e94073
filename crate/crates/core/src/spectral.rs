//! Population covariance models built from discrete spectral distributions.
//!
//! A [`SpectrumSpec`] is a finite list of weighted point masses `(w_i, τ_i)`.
//! [`build_covariance`] realises it at a concrete dimension `p` by giving each
//! atom a multiplicity close to `w_i·p` (largest-remainder apportionment) and
//! laying the eigenvalues out in ascending order, optionally rotated by an
//! orthonormal basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;
const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// One point mass of a spectral distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub weight: f64,
    pub eigenvalue: f64,
}

impl SpectralAtom {
    pub fn new(weight: f64, eigenvalue: f64) -> Self {
        Self { weight, eigenvalue }
    }
}

/// A discrete eigenvalue distribution: weights in `[0, 1]` summing to one,
/// eigenvalues strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSpec {
    atoms: Vec<SpectralAtom>,
}

/// Inverse spectral moments `∫dH/τ` and `∫dH/τ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoments {
    pub inv_first: f64,
    pub inv_second: f64,
}

impl SpectrumSpec {
    pub fn new(atoms: Vec<SpectralAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpectrum("spectrum has no atoms".into()));
        }
        for (i, atom) in atoms.iter().enumerate() {
            if !(atom.weight.is_finite() && (0.0..=1.0).contains(&atom.weight)) {
                return Err(Error::InvalidSpectrum(format!(
                    "atom {i}: weight {} outside [0, 1]",
                    atom.weight
                )));
            }
            if !(atom.eigenvalue.is_finite() && atom.eigenvalue > 0.0) {
                return Err(Error::InvalidSpectrum(format!(
                    "atom {i}: eigenvalue {} is not strictly positive",
                    atom.eigenvalue
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidSpectrum(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Builds a spectrum from `(weight, eigenvalue)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(w, t)| SpectralAtom::new(w, t)).collect())
    }

    /// Single atom at `eigenvalue`, i.e. a multiple of the identity.
    pub fn point_mass(eigenvalue: f64) -> Result<Self> {
        Self::from_pairs(&[(1.0, eigenvalue)])
    }

    pub fn atoms(&self) -> &[SpectralAtom] {
        &self.atoms
    }

    pub fn moments(&self) -> SpectralMoments {
        spectral_moments(self)
    }

    /// The spectrum of the inverse matrix: same weights, reciprocal eigenvalues.
    pub fn reciprocal(&self) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| SpectralAtom::new(a.weight, 1.0 / a.eigenvalue))
                .collect(),
        }
    }

    /// Multiplicity of each atom at dimension `p` by largest remainder.
    ///
    /// Each atom first receives `⌊w·p⌋`; the leftover slots go to the atoms
    /// with the largest fractional parts, ties resolved by atom order.
    pub fn multiplicities(&self, p: usize) -> Vec<usize> {
        let raw: Vec<f64> = self.atoms.iter().map(|a| a.weight * p as f64).collect();
        // the 1e-9 nudge keeps products like 0.29·100 = 28.999… from losing a slot
        let mut counts: Vec<usize> = raw.iter().map(|r| (r + 1e-9).floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut leftover = p.saturating_sub(assigned);
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = raw[a] - counts[a] as f64;
            let fb = raw[b] - counts[b] as f64;
            fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            counts[i] += 1;
            leftover -= 1;
        }
        counts
    }
}

impl<'de> Deserialize<'de> for SpectrumSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let atoms = Vec::<SpectralAtom>::deserialize(deserializer)?;
        SpectrumSpec::new(atoms).map_err(serde::de::Error::custom)
    }
}

/// `(Σ w_i/τ_i, Σ w_i/τ_i²)`.
pub fn spectral_moments(spec: &SpectrumSpec) -> SpectralMoments {
    let mut inv_first = 0.0;
    let mut inv_second = 0.0;
    for a in spec.atoms() {
        inv_first += a.weight / a.eigenvalue;
        inv_second += a.weight / (a.eigenvalue * a.eigenvalue);
    }
    SpectralMoments { inv_first, inv_second }
}

/// Population covariance `Σ = B·diag(τ)·B'` with its inverse and cached norms.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    eigenvalues: DVector<f64>,
    basis: Option<DMatrix<f64>>,
    sigma: DMatrix<f64>,
    precision: DMatrix<f64>,
    precision_frobenius_sq: f64,
    precision_trace_norm: f64,
}

impl CovarianceModel {
    /// Builds a model from eigenvalues and an optional orthonormal basis
    /// (`None` means the identity, so `Σ` is diagonal).
    pub fn from_eigen(eigenvalues: DVector<f64>, basis: Option<DMatrix<f64>>) -> Result<Self> {
        let p = eigenvalues.len();
        if p == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {bad} is not strictly positive"
            )));
        }
        if let Some(b) = &basis {
            if b.nrows() != p || b.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: b.nrows(),
                });
            }
            let deviation = orthonormality_deviation(b);
            if !(deviation <= ORTHONORMAL_TOLERANCE) {
                return Err(Error::NonOrthonormalBasis(deviation));
            }
        }
        let inv: DVector<f64> = eigenvalues.map(|t| 1.0 / t);
        let (sigma, precision) = match &basis {
            None => (
                DMatrix::from_diagonal(&eigenvalues),
                DMatrix::from_diagonal(&inv),
            ),
            Some(b) => (rotate(b, &eigenvalues), rotate(b, &inv)),
        };
        let precision_frobenius_sq = precision.dot(&precision);
        let precision_trace_norm = inv.sum();
        Ok(Self {
            eigenvalues,
            basis,
            sigma,
            precision,
            precision_frobenius_sq,
            precision_trace_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues `τ` in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn is_diagonal(&self) -> bool {
        self.basis.is_none()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `‖Σ⁻¹‖²_F`
    pub fn precision_frobenius_sq(&self) -> f64 {
        self.precision_frobenius_sq
    }

    /// `‖Σ⁻¹‖_tr = tr(Σ⁻¹)`
    pub fn precision_trace_norm(&self) -> f64 {
        self.precision_trace_norm
    }

    /// `Σ^{a}` for a real power, through the eigendecomposition.
    pub fn power(&self, exponent: f64) -> DMatrix<f64> {
        let d = self.eigenvalues.map(|t| t.powf(exponent));
        match &self.basis {
            None => DMatrix::from_diagonal(&d),
            Some(b) => rotate(b, &d),
        }
    }

    /// `Σ^{1/2}·X` without forming the square root densely for diagonal models.
    pub fn apply_sqrt(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let roots = self.eigenvalues.map(f64::sqrt);
        match &self.basis {
            None => {
                let mut y = x.clone();
                for (mut row, r) in y.row_iter_mut().zip(roots.iter()) {
                    row *= *r;
                }
                y
            }
            Some(b) => {
                let mut z = b.transpose() * x;
                for (mut row, r) in z.row_iter_mut().zip(roots.iter()) {
                    row *= *r;
                }
                b * z
            }
        }
    }
}

fn rotate(basis: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = basis.clone();
    for (mut col, d) in scaled.column_iter_mut().zip(diag.iter()) {
        col *= *d;
    }
    let m = &scaled * basis.transpose();
    (&m + m.transpose()) * 0.5
}

/// `max |B'B − I|`
pub(crate) fn orthonormality_deviation(b: &DMatrix<f64>) -> f64 {
    let gram = b.transpose() * b;
    let mut worst: f64 = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Realises `spec` as a `p`-dimensional covariance model.
///
/// Eigenvalues are laid out in ascending order (stable with respect to atom
/// order) before the optional basis rotation.
pub fn build_covariance(
    spec: &SpectrumSpec,
    p: usize,
    basis: Option<DMatrix<f64>>,
) -> Result<CovarianceModel> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let counts = spec.multiplicities(p);
    let mut values: Vec<f64> = Vec::with_capacity(p);
    for (atom, &count) in spec.atoms().iter().zip(&counts) {
        values.extend(std::iter::repeat_n(atom.eigenvalue, count));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    CovarianceModel::from_eigen(DVector::from_vec(values), basis)
}

/// Three-block spectrum used throughout the simulation study: 20% of the
/// eigenvalues at 1, 40% at 3 and 40% at 10.
pub fn three_block_spectrum() -> SpectrumSpec {
    SpectrumSpec::from_pairs(&[(0.2, 1.0), (0.4, 3.0), (0.4, 10.0)]).expect("valid spectrum")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_block_at_ten() {
        let model = build_covariance(&three_block_spectrum(), 10, None).unwrap();
        let diag: Vec<f64> = model.sigma().diagonal().iter().copied().collect();
        assert_eq!(diag, vec![1.0, 1.0, 3.0, 3.0, 3.0, 3.0, 10.0, 10.0, 10.0, 10.0]);
        assert!(model.is_diagonal());
        assert_eq!(model.sigma().clone() - DMatrix::from_diagonal(&model.sigma().diagonal()), DMatrix::zeros(10, 10));
    }

    #[test]
    fn single_atom_is_scaled_identity() {
        let model = build_covariance(&SpectrumSpec::point_mass(2.5).unwrap(), 5, None).unwrap();
        assert_eq!(*model.sigma(), DMatrix::identity(5, 5) * 2.5);
        assert_relative_eq!(model.precision_trace_norm(), 2.0);
    }

    #[test]
    fn largest_remainder_at_seven() {
        assert_eq!(three_block_spectrum().multiplicities(7), vec![1, 3, 3]);
    }

    #[test]
    fn remainder_ties_go_to_earlier_atoms() {
        let spec = SpectrumSpec::from_pairs(&[(0.5, 1.0), (0.5, 2.0)]).unwrap();
        assert_eq!(spec.multiplicities(3), vec![2, 1]);
    }

    #[test]
    fn moments() {
        let m = SpectrumSpec::point_mass(1.0).unwrap().moments();
        assert_eq!((m.inv_first, m.inv_second), (1.0, 1.0));
        let m = SpectrumSpec::point_mass(2.0).unwrap().moments();
        assert_eq!((m.inv_first, m.inv_second), (0.5, 0.25));
        let m = three_block_spectrum().moments();
        assert_relative_eq!(m.inv_first, 0.2 + 0.4 / 3.0 + 0.04, epsilon = 1e-15);
        assert_relative_eq!(m.inv_second, 0.2 + 0.4 / 9.0 + 0.004, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(SpectrumSpec::new(vec![]), Err(Error::InvalidSpectrum(_))));
        assert!(SpectrumSpec::from_pairs(&[(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(SpectrumSpec::from_pairs(&[(1.0, 0.0)]).is_err());
        assert!(SpectrumSpec::from_pairs(&[(1.0, -3.0)]).is_err());
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let mut b = DMatrix::identity(3, 3);
        b[(0, 1)] = 0.1;
        let err = build_covariance(&three_block_spectrum(), 3, Some(b)).unwrap_err();
        assert!(matches!(err, Error::NonOrthonormalBasis(_)));
    }

    #[test]
    fn rotated_model_inverts() {
        let theta: f64 = 0.3;
        let (s, c) = theta.sin_cos();
        let b = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let model = build_covariance(&three_block_spectrum(), 3, Some(b)).unwrap();
        let prod = model.sigma() * model.precision();
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let half = model.power(0.5);
        assert!((&half * &half - model.sigma()).abs().max() < 1e-12);
    }
}
