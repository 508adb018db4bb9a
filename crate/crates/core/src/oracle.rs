//! The phase-flip Grover oracle and its faulty version.
//!
//! The faulty oracle applies the perfect oracle with probability `1 - p` and
//! does nothing with probability `p`:
//!
//! ```text
//! rho  ->  (1 - p) O_k rho O_k  +  p rho
//! ```
//!
//! The perfect oracle is diagonal, so every routine here works on signs rather
//! than on a materialized `d x d` matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::state::{AmplitudeBlock, DensityMatrix, RegisterDims, StateVector, UnitaryOp, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultyOracleSpec {
    k: usize,
    p: f64,
    dims: RegisterDims,
}

impl FaultyOracleSpec {
    /// Marked index `k` in `0..=n` (0 is the null oracle) and fault
    /// probability strictly inside `(0, 1)`.
    pub fn new(dims: RegisterDims, k: usize, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidOracle(format!("fault probability p = {p} must lie in (0, 1)")));
        }
        Self::with_limits(dims, k, p)
    }

    /// Like [`FaultyOracleSpec::new`] but also admits the limits `p = 0`
    /// (fault-free) and `p = 1` (never fires).
    pub fn with_limits(dims: RegisterDims, k: usize, p: f64) -> Result<Self> {
        if k > dims.n() {
            return Err(Error::InvalidOracle(format!("marked index k = {k} exceeds n = {}", dims.n())));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidOracle(format!("fault probability p = {p} must lie in [0, 1]")));
        }
        Ok(Self { k, p, dims })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dims(&self) -> RegisterDims {
        self.dims
    }

    /// Same fault probability, different marked index.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::with_limits(self.dims, k, self.p)
    }

    /// The null oracle with the same fault probability.
    pub fn null(&self) -> Self {
        Self { k: 0, ..*self }
    }

    /// Flat index range of the marked block, empty for the null oracle.
    fn marked_range(&self) -> std::ops::Range<usize> {
        if self.k == 0 {
            0..0
        } else {
            let start = self.dims.index(self.k, 1);
            start..start + self.dims.m()
        }
    }
}

/// `I - 2 |k><k| (x) I_M`, or the identity for `k = 0`.
pub fn perfect_oracle(spec: &FaultyOracleSpec) -> UnitaryOp {
    let d = spec.dims.d();
    let mut entries = DMatrix::identity(d, d);
    for a in spec.marked_range() {
        entries[(a, a)] = C64::new(-1.0, 0.0);
    }
    UnitaryOp::from_parts_unchecked(spec.dims, entries)
}

/// Applies the perfect oracle to raw amplitudes in place.
pub(crate) fn apply_perfect_oracle_in_place(spec: &FaultyOracleSpec, amplitudes: &mut DVector<C64>) {
    for a in spec.marked_range() {
        amplitudes[a] = -amplitudes[a];
    }
}

/// Applies the faulty channel to a raw `d x d` operator in place.
///
/// Entry `(a, b)` picks up `(1 - p) s_a s_b + p` where `s` are the oracle
/// signs, i.e. it is untouched when `s_a = s_b` and scaled by `2p - 1` when
/// exactly one of `a`, `b` is marked.
pub(crate) fn apply_channel_in_place(spec: &FaultyOracleSpec, rho: &mut DMatrix<C64>) {
    let range = spec.marked_range();
    if range.is_empty() {
        return;
    }
    let factor = 2.0 * spec.p - 1.0;
    let d = rho.nrows();
    for c in 0..d {
        let c_marked = range.contains(&c);
        for r in 0..d {
            if range.contains(&r) != c_marked {
                rho[(r, c)] *= factor;
            }
        }
    }
}

pub fn apply_faulty_channel(rho: &DensityMatrix, spec: &FaultyOracleSpec) -> Result<DensityMatrix> {
    rho.dims().ensure_same(&spec.dims)?;
    let mut out = rho.entries().clone();
    apply_channel_in_place(spec, &mut out);
    DensityMatrix::from_parts_unchecked(spec.dims, out)
}

/// One draw of the mixture-of-unitaries form of the channel.
///
/// Returns the output state and whether the call faulted (left the state
/// untouched). Faults occur with probability `p`.
pub fn sample_faulty_application(
    state: &StateVector,
    spec: &FaultyOracleSpec,
    stream: &mut RandomStream,
) -> Result<(StateVector, bool)> {
    state.dims().ensure_same(&spec.dims)?;
    let fault = stream.uniform() < spec.p;
    if fault {
        return Ok((state.clone(), true));
    }
    let mut amps = state.amplitudes().clone();
    apply_perfect_oracle_in_place(spec, &mut amps);
    Ok((StateVector::from_parts_unchecked(spec.dims, amps), false))
}

/// Splits the channel output on a pure input into a pure part and a
/// rank-one leak:
///
/// ```text
/// channel(|phi><phi|) = |phi~><phi~| + 4p(1-p) |k, beta_k><k, beta_k|
/// phi~ = phi - 2(1-p) |k, beta_k>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeResult {
    pub phi_tilde: StateVector,
    /// The block `beta_k` of the input on the marked index.
    pub leak: AmplitudeBlock,
    /// `4p(1-p)`.
    pub leak_weight: f64,
}

impl DecomposeResult {
    /// `|k, beta_k>` as a full-register vector.
    pub fn leak_vector(&self) -> DVector<C64> {
        self.leak.embed(self.phi_tilde.dims())
    }

    /// `|phi~><phi~| + 4p(1-p) |k, beta_k><k, beta_k|`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let leak = self.leak_vector();
        self.phi_tilde.outer() + (&leak * leak.adjoint()).map(|x| x * self.leak_weight)
    }
}

pub fn lemma_decompose(phi: &StateVector, spec: &FaultyOracleSpec) -> Result<DecomposeResult> {
    phi.dims().ensure_same(&spec.dims)?;
    if spec.k == 0 {
        return Err(Error::NullOracle);
    }
    let leak = phi.block(spec.k);
    let shrink = 1.0 - 2.0 * (1.0 - spec.p);
    let mut amps = phi.amplitudes().clone();
    for a in spec.marked_range() {
        amps[a] *= shrink;
    }
    Ok(DecomposeResult {
        phi_tilde: StateVector::from_parts_unchecked(spec.dims, amps),
        leak,
        leak_weight: 4.0 * spec.p * (1.0 - spec.p),
    })
}
