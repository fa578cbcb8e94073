//! C ABI over `precshrink`.
//!
//! Matrices cross the boundary as contiguous `double` buffers in row-major
//! order. Objects are opaque handles created by `ps_*_new` functions and
//! released with the matching `ps_*_free`. Every fallible call returns a
//! [`PsStatus`]; on failure `ps_last_error_message` describes the error for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use precshrink::asymptotics::{psi_limit, solve_x0, x0_prime};
use precshrink::estimators::{bona_fide_olse, oracle_olse, PrecisionEstimate, TargetMatrix};
use precshrink::linalg::{sample_covariance, sample_covariance_centered, DataMatrix, Regime, SampleStats};
use precshrink::metrics::{frobenius_loss, prial};
use precshrink::spectral::{build_covariance, CovarianceModel, SpectralAtom, SpectrumSpec};
use precshrink::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Singular = 4,
    RegimeMismatch = 5,
    DegenerateTarget = 6,
    NonConvergence = 7,
    InconsistentInput = 8,
    UndefinedPrial = 9,
    Panic = 10,
    Internal = 11,
}

/// Regime carried by a sample statistics handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsRegime {
    /// `p < n`, plain inverse.
    Invertible = 0,
    /// `p >= n`, Moore-Penrose pseudo-inverse.
    Pseudo = 1,
}

/// Sample covariance with its cached decomposition and (pseudo-)inverse.
pub struct PsSampleStats(SampleStats);

/// Population covariance model.
pub struct PsCovarianceModel(CovarianceModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::DimensionMismatch { .. } => PsStatus::DimensionMismatch,
        Error::Singular { .. } | Error::DegeneratePseudoInverse => PsStatus::Singular,
        Error::RegimeMismatch { .. } | Error::NearSingularRegime { .. } | Error::UnsupportedRegime(_) => {
            PsStatus::RegimeMismatch
        }
        Error::DegenerateTarget { .. } => PsStatus::DegenerateTarget,
        Error::NonConvergence { .. } => PsStatus::NonConvergence,
        Error::InconsistentInput(_) => PsStatus::InconsistentInput,
        Error::UndefinedPrial(_) => PsStatus::UndefinedPrial,
        Error::InvalidSpectrum(_) | Error::InvalidInput(_) | Error::NonOrthonormalBasis(_) => PsStatus::InvalidInput,
        _ => PsStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer passed for `{name}`"));
            PsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PsStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn row_major(p: *const f64, rows: usize, cols: usize, name: &'static str) -> Result<DMatrix<f64>, Failure> {
    Ok(DMatrix::from_row_slice(rows, cols, slice(p, rows * cols, name)?))
}

unsafe fn write_row_major(m: &DMatrix<f64>, dst: *mut f64) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::Null("out_matrix"));
    }
    let buf = std::slice::from_raw_parts_mut(dst, m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn spectrum(weights: *const f64, eigenvalues: *const f64, atoms: usize) -> Result<SpectrumSpec, Failure> {
    let w = slice(weights, atoms, "weights")?;
    let t = slice(eigenvalues, atoms, "eigenvalues")?;
    Ok(SpectrumSpec::new(
        w.iter().zip(t).map(|(&w, &t)| SpectralAtom::new(w, t)).collect(),
    )?)
}

/// `target` may be null, meaning `I/p`.
unsafe fn target(p: usize, target: *const f64) -> Result<TargetMatrix, Failure> {
    if target.is_null() {
        Ok(TargetMatrix::identity_over_p(p))
    } else {
        Ok(TargetMatrix::new(row_major(target, p, p, "target")?)?)
    }
}

unsafe fn emit(est: PrecisionEstimate, out_matrix: *mut f64, out_alpha: *mut f64, out_beta: *mut f64) -> Result<(), Failure> {
    write_row_major(&est.matrix, out_matrix)?;
    if let Some(w) = est.weights {
        if let Some(a) = out_alpha.as_mut() {
            *a = w.alpha;
        }
        if let Some(b) = out_beta.as_mut() {
            *b = w.beta;
        }
    }
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains nul"),
    };
    VERSION.as_ptr()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds sample statistics from a `p × n` row-major data buffer
/// (rows are variables). With `center` nonzero, means are removed and the
/// divisor is `n − 1`.
///
/// # Safety
/// `data` must point to `p * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_sample_stats_new(
    data: *const f64,
    p: usize,
    n: usize,
    center: i32,
    out: *mut *mut PsSampleStats,
) -> PsStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = ptr::null_mut();
        let y = DataMatrix::new(row_major(data, p, n, "data")?)?;
        let stats = if center != 0 {
            sample_covariance_centered(&y)?
        } else {
            sample_covariance(&y)?
        };
        *slot = Box::into_raw(Box::new(PsSampleStats(stats)));
        Ok(())
    })
}

/// Releases a handle from `ps_sample_stats_new`. Null is ignored.
///
/// # Safety
/// `stats` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_sample_stats_free(stats: *mut PsSampleStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// # Safety
/// `stats` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_sample_stats_dims(
    stats: *const PsSampleStats,
    out_p: *mut usize,
    out_n: *mut usize,
    out_regime: *mut PsRegime,
) -> PsStatus {
    guard(|| {
        let s = &nonnull(stats, "stats")?.0;
        *out(out_p, "out_p")? = s.p();
        *out(out_n, "out_n")? = s.n();
        *out(out_regime, "out_regime")? = match s.regime() {
            Regime::Invertible => PsRegime::Invertible,
            Regime::Pseudo => PsRegime::Pseudo,
        };
        Ok(())
    })
}

/// Builds a diagonal population model realising the spectrum at dimension `p`.
///
/// # Safety
/// `weights` and `eigenvalues` must hold `atoms` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_model_new(
    weights: *const f64,
    eigenvalues: *const f64,
    atoms: usize,
    p: usize,
    out: *mut *mut PsCovarianceModel,
) -> PsStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = ptr::null_mut();
        let model = build_covariance(&spectrum(weights, eigenvalues, atoms)?, p, None)?;
        *slot = Box::into_raw(Box::new(PsCovarianceModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_model_free(model: *mut PsCovarianceModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copies the model's precision matrix `Σ⁻¹` into `out_matrix` (`p * p`).
///
/// # Safety
/// `model` must be live and `out_matrix` must hold `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_model_precision(model: *const PsCovarianceModel, out_matrix: *mut f64) -> PsStatus {
    guard(|| write_row_major(nonnull(model, "model")?.0.precision(), out_matrix))
}

/// Feasible shrinkage estimate `α̂·S⁻¹ + β̂·Π₀` (requires `p < n`).
/// `target` is a row-major `p × p` matrix or null for `I/p`.
/// `out_alpha` and `out_beta` may be null.
///
/// # Safety
/// `stats` must be live; buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ps_bona_fide(
    stats: *const PsSampleStats,
    target: *const f64,
    clamp: i32,
    out_matrix: *mut f64,
    out_alpha: *mut f64,
    out_beta: *mut f64,
) -> PsStatus {
    guard(|| {
        let s = &nonnull(stats, "stats")?.0;
        let t = self::target(s.p(), target)?;
        emit(bona_fide_olse(s, &t, clamp != 0)?, out_matrix, out_alpha, out_beta)
    })
}

/// Oracle shrinkage estimate in either regime.
///
/// # Safety
/// `stats` and `model` must be live; buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ps_oracle(
    stats: *const PsSampleStats,
    model: *const PsCovarianceModel,
    target: *const f64,
    out_matrix: *mut f64,
    out_alpha: *mut f64,
    out_beta: *mut f64,
) -> PsStatus {
    guard(|| {
        let s = &nonnull(stats, "stats")?.0;
        let m = &nonnull(model, "model")?.0;
        let t = self::target(s.p(), target)?;
        emit(oracle_olse(s, m, &t)?, out_matrix, out_alpha, out_beta)
    })
}

/// Limit of `‖S⁻¹‖²_F / p` for `0 < c < 1`.
///
/// # Safety
/// `weights` and `eigenvalues` must hold `atoms` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_psi_limit(
    weights: *const f64,
    eigenvalues: *const f64,
    atoms: usize,
    c: f64,
    out_psi: *mut f64,
) -> PsStatus {
    guard(|| {
        *out(out_psi, "out_psi")? = psi_limit(&spectrum(weights, eigenvalues, atoms)?, c)?;
        Ok(())
    })
}

/// `x(0)` and `x′(0)` for `c > 1`. `out_x0_prime` may be null.
///
/// # Safety
/// `model` must be live; `out_x0` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_x0(
    model: *const PsCovarianceModel,
    c: f64,
    out_x0: *mut f64,
    out_x0_prime: *mut f64,
) -> PsStatus {
    guard(|| {
        let m = &nonnull(model, "model")?.0;
        let x0 = solve_x0(m, c)?.value;
        *out(out_x0, "out_x0")? = x0;
        if let Some(xp) = out_x0_prime.as_mut() {
            *xp = x0_prime(m, c, x0)?;
        }
        Ok(())
    })
}

/// `‖estimate − truth‖²_F` for two row-major `p × p` matrices.
///
/// # Safety
/// Both buffers must hold `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_frobenius_loss(
    estimate: *const f64,
    truth: *const f64,
    p: usize,
    out_loss: *mut f64,
) -> PsStatus {
    guard(|| {
        // entrywise, so the storage order is irrelevant
        let a = DMatrix::from_column_slice(p, p, slice(estimate, p * p, "estimate")?);
        let b = DMatrix::from_column_slice(p, p, slice(truth, p * p, "truth")?);
        *out(out_loss, "out_loss")? = frobenius_loss(&a, &b)?;
        Ok(())
    })
}

/// `(1 − estimator/baseline)·100`.
///
/// # Safety
/// `out_percent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_prial(mean_loss_estimator: f64, mean_loss_baseline: f64, out_percent: *mut f64) -> PsStatus {
    guard(|| {
        *out(out_percent, "out_percent")? = prial(mean_loss_estimator, mean_loss_baseline)?;
        Ok(())
    })
}
