//! State-space types for an `N`-dimensional query register paired with an
//! `M`-dimensional ancilla.
//!
//! Basis state `|i, j>` (query `i` in `1..=N`, ancilla `j` in `1..=M`) lives at
//! flat index `(i - 1) * M + (j - 1)`, so the amplitudes on a fixed query index
//! form a contiguous slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = Complex64;

/// Largest total dimension accepted for exact density-matrix evolution.
pub const DEFAULT_MAX_DIM: usize = 256;

const NORM_SLACK: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RegisterDims {
    n: usize,
    m: usize,
}

impl RegisterDims {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDims(format!("query dimension n = {n} must be at least 2")));
        }
        if m < 1 {
            return Err(Error::InvalidDims("ancilla dimension m must be at least 1".into()));
        }
        n.checked_mul(m).ok_or_else(|| Error::InvalidDims(format!("n * m overflows for n = {n}, m = {m}")))?;
        Ok(Self { n, m })
    }

    /// Query register dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Ancilla dimension `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total dimension `N * M`.
    pub fn d(&self) -> usize {
        self.n * self.m
    }

    /// Flat index of `|i, j>` with 1-based `i` and `j`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i) && (1..=self.m).contains(&j));
        (i - 1) * self.m + (j - 1)
    }

    pub fn ensure_within(&self, max_dim: usize) -> Result<()> {
        if self.d() > max_dim {
            Err(Error::SizeCap { d: self.d(), max: max_dim })
        } else {
            Ok(())
        }
    }

    pub(crate) fn ensure_same(&self, other: &RegisterDims) -> Result<()> {
        if self != other {
            Err(Error::DimensionMismatch { expected: self.d(), found: other.d() })
        } else {
            Ok(())
        }
    }
}

/// Amplitudes of a state on one query index: the vector `beta_i` in
/// `|psi> = sum_i |i, beta_i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeBlock {
    /// 1-based query index.
    pub index: usize,
    pub block: DVector<C64>,
}

impl AmplitudeBlock {
    pub fn norm_sqr(&self) -> f64 {
        self.block.norm_squared()
    }

    /// Embeds the block as the full-register vector `|i, beta_i>`.
    pub fn embed(&self, dims: RegisterDims) -> DVector<C64> {
        let mut out = DVector::zeros(dims.d());
        let start = dims.index(self.index, 1);
        out.rows_mut(start, dims.m()).copy_from(&self.block);
        out
    }
}

/// A pure, possibly sub-normalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    dims: RegisterDims,
}

impl StateVector {
    pub fn new(dims: RegisterDims, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != dims.d() {
            return Err(Error::DimensionMismatch { expected: dims.d(), found: amplitudes.len() });
        }
        let norm = amplitudes.norm_squared();
        if !norm.is_finite() || norm > 1.0 + NORM_SLACK {
            return Err(Error::InvalidNorm(norm));
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn from_vec(dims: RegisterDims, amplitudes: Vec<C64>) -> Result<Self> {
        Self::new(dims, DVector::from_vec(amplitudes))
    }

    pub(crate) fn from_parts_unchecked(dims: RegisterDims, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), dims.d());
        Self { amplitudes, dims }
    }

    /// The basis state `|i, j>` (1-based).
    pub fn basis(dims: RegisterDims, i: usize, j: usize) -> Self {
        let mut amplitudes = DVector::zeros(dims.d());
        amplitudes[dims.index(i, j)] = C64::new(1.0, 0.0);
        Self { amplitudes, dims }
    }

    /// Reassembles a state from its blocks, in the order given.
    pub fn from_blocks(dims: RegisterDims, blocks: &[AmplitudeBlock]) -> Result<Self> {
        if blocks.len() != dims.n() {
            return Err(Error::DimensionMismatch { expected: dims.n(), found: blocks.len() });
        }
        let mut amps = Vec::with_capacity(dims.d());
        for b in blocks {
            if b.block.len() != dims.m() {
                return Err(Error::DimensionMismatch { expected: dims.m(), found: b.block.len() });
            }
            amps.extend(b.block.iter().copied());
        }
        Self::from_vec(dims, amps)
    }

    pub fn dims(&self) -> RegisterDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// The block `beta_i` on 1-based query index `i`.
    pub fn block(&self, i: usize) -> AmplitudeBlock {
        let start = self.dims.index(i, 1);
        AmplitudeBlock { index: i, block: self.amplitudes.rows(start, self.dims.m()).into_owned() }
    }

    /// Squared norm of the block on query index `i`, i.e. the probability of
    /// reading `i` from the query register when the state is normalized.
    pub fn query_weight(&self, i: usize) -> f64 {
        let start = self.dims.index(i, 1);
        self.amplitudes.rows(start, self.dims.m()).norm_squared()
    }

    /// The (unnormalized) projector `|self><self|`.
    pub fn outer(&self) -> DMatrix<C64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Splits a state into its `n` query blocks, each of length `m`.
pub fn block_decompose(state: &StateVector) -> Result<Vec<AmplitudeBlock>> {
    let dims = state.dims;
    if state.amplitudes.len() != dims.d() {
        return Err(Error::DimensionMismatch { expected: dims.d(), found: state.amplitudes.len() });
    }
    Ok((1..=dims.n()).map(|i| state.block(i)).collect())
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
    dims: RegisterDims,
}

impl DensityMatrix {
    /// Validates all density-matrix invariants. Costs one eigendecomposition.
    pub fn new(dims: RegisterDims, entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_parts_unchecked(dims, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(dims: RegisterDims, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != dims.d() || entries.ncols() != dims.d() {
            return Err(Error::DimensionMismatch { expected: dims.d(), found: entries.nrows() });
        }
        Ok(Self { entries, dims })
    }

    /// `|phi><phi|` for a unit-norm `phi`.
    pub fn from_pure(phi: &StateVector) -> Result<Self> {
        let norm = phi.norm_sqr();
        if (norm - 1.0).abs() > NORM_SLACK {
            return Err(Error::InvalidNorm(norm));
        }
        Ok(Self { entries: phi.outer(), dims: phi.dims })
    }

    /// Maximally mixed state `I / d`.
    pub fn maximally_mixed(dims: RegisterDims) -> Self {
        let d = dims.d();
        Self { entries: DMatrix::identity(d, d).map(|x: C64| x / d as f64), dims }
    }

    pub fn dims(&self) -> RegisterDims {
        self.dims
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// `<phi|rho|phi>`.
    pub fn expectation(&self, phi: &StateVector) -> f64 {
        phi.amplitudes.dotc(&(&self.entries * &phi.amplitudes)).re
    }

    /// Probability of reading query index `i`: `tr((|i><i| (x) I) rho)`.
    pub fn query_weight(&self, i: usize) -> f64 {
        let start = self.dims.index(i, 1);
        (start..start + self.dims.m()).map(|a| self.entries[(a, a)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.entries).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Numerical rank: eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        linalg::hermitian_eigenvalues(&self.entries).iter().filter(|&&l| l > tol).count()
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    entries: DMatrix<C64>,
    dims: RegisterDims,
}

impl UnitaryOp {
    pub fn new(dims: RegisterDims, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != dims.d() || entries.ncols() != dims.d() {
            return Err(Error::DimensionMismatch { expected: dims.d(), found: entries.nrows() });
        }
        let err = unitarity_error(&entries);
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { entries, dims })
    }

    pub(crate) fn from_parts_unchecked(dims: RegisterDims, entries: DMatrix<C64>) -> Self {
        Self { entries, dims }
    }

    pub fn identity(dims: RegisterDims) -> Self {
        Self { entries: DMatrix::identity(dims.d(), dims.d()), dims }
    }

    pub fn dims(&self) -> RegisterDims {
        self.dims
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.entries)
    }
}

/// Max entrywise deviation of `U^dag U` from the identity.
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let d = prod.nrows();
    let mut err = 0.0f64;
    for c in 0..d {
        for r in 0..d {
            let target = if r == c { 1.0 } else { 0.0 };
            err = err.max((prod[(r, c)] - C64::new(target, 0.0)).norm());
        }
    }
    err
}
