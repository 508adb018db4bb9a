//! Spectral quantities and random unitaries.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::state::{DensityMatrix, RegisterDims, StateVector, UnitaryOp, C64};

const HERMITIAN_INPUT_TOL: f64 = 1e-8;
const UNIT_NORM_TOL: f64 = 1e-9;

/// Max entrywise `|A - A^dag|`.
pub fn hermiticity_error(a: &DMatrix<C64>) -> f64 {
    let d = a.nrows();
    let mut err = 0.0f64;
    for c in 0..d {
        for r in c..d {
            err = err.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    err
}

/// Largest entry modulus.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part `(A + A^dag) / 2`, unsorted.
pub(crate) fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    let sym = (a + a.adjoint()).map(|x| x * 0.5);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &DMatrix<C64>) -> Result<f64> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let herm = hermiticity_error(h);
    if herm > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian(herm));
    }
    Ok(hermitian_eigenvalues(h).into_iter().fold(f64::INFINITY, f64::min))
}

/// Normalized trace distance `(1/2) sum |lambda_i(a - b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.dims().ensure_same(&b.dims())?;
    Ok(trace_distance_raw(a.entries(), b.entries()))
}

pub(crate) fn trace_distance_raw(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let diff = a - b;
    0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>()
}

/// Upper bound `sqrt(1 - <phi|rho|phi>)` on the trace distance between `rho`
/// and the pure state `phi`.
pub fn pure_mixed_distance_bound(rho: &DensityMatrix, phi: &StateVector) -> Result<f64> {
    rho.dims().ensure_same(&phi.dims())?;
    let norm = phi.norm_sqr();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidNorm(norm));
    }
    let overlap = rho.expectation(phi);
    Ok((1.0 - overlap).clamp(0.0, 1.0).sqrt())
}

/// Haar-distributed `d x d` unitary: QR of a standard complex Gaussian matrix,
/// with the phases of `diag(R)` pushed into `Q`.
pub fn haar_random_matrix(d: usize, stream: &mut RandomStream) -> DMatrix<C64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill so the draw order is fixed.
    let gauss = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(stream);
        let im: f64 = StandardNormal.sample(stream);
        C64::new(re * scale, im * scale)
    });
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..d {
        let diag = r[(c, c)];
        let norm = diag.norm();
        let phase = if norm > 0.0 { diag / norm } else { C64::new(1.0, 0.0) };
        for x in q.column_mut(c).iter_mut() {
            *x *= phase;
        }
    }
    q
}

pub fn haar_random_unitary(dims: RegisterDims, stream: &mut RandomStream) -> UnitaryOp {
    UnitaryOp::from_parts_unchecked(dims, haar_random_matrix(dims.d(), stream))
}
