//! Query algorithms: a sequence `U_0, ..., U_T` of unitaries with an oracle
//! call between consecutive ones, started from `|1, 1>`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::haar_random_unitary;
use crate::rng::RandomStream;
use crate::state::{RegisterDims, StateVector, UnitaryOp, C64, DEFAULT_MAX_DIM};

/// One unitary of an algorithm.
///
/// The structured variants act on the query register only (tensored with the
/// ancilla identity) and apply in `O(d)` without materializing a matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOp {
    Dense(UnitaryOp),
    /// Householder reflection swapping `|1>` and the uniform superposition
    /// `|s>`; maps `|1>` to `|s>`.
    PrepareUniform,
    /// Grover diffusion `2|s><s| - I`.
    Diffusion,
}

impl StepOp {
    fn apply(&self, dims: RegisterDims, v: &mut DVector<C64>) {
        match self {
            StepOp::Dense(u) => *v = u.entries() * &*v,
            StepOp::PrepareUniform => for_each_query_slice(dims, v, householder_to_uniform),
            StepOp::Diffusion => for_each_query_slice(dims, v, diffuse),
        }
    }

    fn matrix(&self, dims: RegisterDims) -> DMatrix<C64> {
        match self {
            StepOp::Dense(u) => u.entries().clone(),
            _ => {
                let d = dims.d();
                let mut out = DMatrix::zeros(d, d);
                for c in 0..d {
                    let mut e = DVector::zeros(d);
                    e[c] = C64::new(1.0, 0.0);
                    self.apply(dims, &mut e);
                    out.set_column(c, &e);
                }
                out
            }
        }
    }
}

/// Runs `f` on the length-`n` query vector of every ancilla index.
fn for_each_query_slice(dims: RegisterDims, v: &mut DVector<C64>, f: fn(&mut [C64])) {
    let (n, m) = (dims.n(), dims.m());
    if m == 1 {
        f(v.as_mut_slice());
        return;
    }
    let mut buf = vec![C64::default(); n];
    for j in 0..m {
        for i in 0..n {
            buf[i] = v[i * m + j];
        }
        f(&mut buf);
        for i in 0..n {
            v[i * m + j] = buf[i];
        }
    }
}

fn diffuse(v: &mut [C64]) {
    let n = v.len() as f64;
    let mean: C64 = v.iter().sum::<C64>() / n;
    for x in v.iter_mut() {
        *x = mean * 2.0 - *x;
    }
}

fn householder_to_uniform(v: &mut [C64]) {
    // w = e_1 - s, H = I - 2 w w^T / (w^T w)
    let n = v.len() as f64;
    let amp = 1.0 / n.sqrt();
    let w0 = 1.0 - amp;
    let w_norm_sqr = 2.0 - 2.0 * amp;
    let dot = v[0] * w0 - v[1..].iter().sum::<C64>() * amp;
    let coef = dot * (2.0 / w_norm_sqr);
    v[0] -= coef * w0;
    for x in v[1..].iter_mut() {
        *x += coef * amp;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAlgorithm {
    dims: RegisterDims,
    steps: Vec<StepOp>,
    label: String,
}

impl QueryAlgorithm {
    /// `steps[t]` is `U_t`; there must be at least one.
    pub fn from_steps(dims: RegisterDims, steps: Vec<StepOp>, label: impl Into<String>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("an algorithm needs at least U_0".into()));
        }
        for step in &steps {
            if let StepOp::Dense(u) = step {
                dims.ensure_same(&u.dims())?;
            }
        }
        Ok(Self { dims, steps, label: label.into() })
    }

    pub fn from_unitaries(dims: RegisterDims, unitaries: Vec<UnitaryOp>, label: impl Into<String>) -> Result<Self> {
        Self::from_steps(dims, unitaries.into_iter().map(StepOp::Dense).collect(), label)
    }

    pub fn dims(&self) -> RegisterDims {
        self.dims
    }

    /// Number of oracle calls `T`.
    pub fn t_count(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn step(&self, t: usize) -> &StepOp {
        &self.steps[t]
    }

    /// Materialized `U_t`.
    pub fn unitary(&self, t: usize) -> UnitaryOp {
        UnitaryOp::from_parts_unchecked(self.dims, self.steps[t].matrix(self.dims))
    }

    /// `|psi~_0> = |1, 1>`.
    pub fn initial_state(&self) -> StateVector {
        StateVector::basis(self.dims, 1, 1)
    }

    /// `v <- U_t v`.
    pub fn apply_step(&self, t: usize, v: &mut DVector<C64>) {
        self.steps[t].apply(self.dims, v);
    }

    /// `U_t x U_t^dag` for any square `x`.
    pub fn conjugate_step(&self, t: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
        match &self.steps[t] {
            StepOp::Dense(u) => u.entries() * x * u.entries().adjoint(),
            step => {
                // (U (U x)^dag)^dag = U x U^dag
                let left = self.apply_columns(step, x.clone());
                self.apply_columns(step, left.adjoint()).adjoint()
            }
        }
    }

    fn apply_columns(&self, step: &StepOp, mut x: DMatrix<C64>) -> DMatrix<C64> {
        let mut col = DVector::zeros(x.nrows());
        for c in 0..x.ncols() {
            col.copy_from(&x.column(c));
            step.apply(self.dims, &mut col);
            x.set_column(c, &col);
        }
        x
    }
}

/// Grover search on `n` items with `t_count` queries: `U_0` prepares the
/// uniform superposition, every later `U_t` is the diffusion reflection.
pub fn build_grover(n: usize, t_count: usize) -> Result<QueryAlgorithm> {
    let dims = RegisterDims::new(n, 1)?;
    let mut steps = Vec::with_capacity(t_count + 1);
    steps.push(StepOp::PrepareUniform);
    steps.extend(std::iter::repeat_n(StepOp::Diffusion, t_count));
    QueryAlgorithm::from_steps(dims, steps, format!("grover(n={n},T={t_count})"))
}

/// `t_count + 1` independent Haar-random unitaries on `dims`.
pub fn build_random_algorithm(dims: RegisterDims, t_count: usize, stream: &mut RandomStream) -> Result<QueryAlgorithm> {
    dims.ensure_within(DEFAULT_MAX_DIM)?;
    let unitaries = (0..=t_count).map(|_| haar_random_unitary(dims, stream)).collect();
    QueryAlgorithm::from_unitaries(
        dims,
        unitaries,
        format!(
            "random(n={},m={},T={t_count},seed={},stream={})",
            dims.n(),
            dims.m(),
            stream.seed(),
            stream.stream_id()
        ),
    )
}

/// Search that records detections in the ancilla instead of rotating.
///
/// Uses `m = t_count + 1` ancilla levels. Level 1 holds the undetected
/// branch, which is re-queried from the uniform superposition; after query
/// `t` the part orthogonal to `|s>` is swapped into level `t + 1`, where later
/// oracle calls only change its global phase. For `n = 2` every successful
/// oracle call is detected, so a null oracle and a marked one are told apart
/// unless every call faults.
pub fn build_flagged_search(n: usize, t_count: usize) -> Result<QueryAlgorithm> {
    let dims = RegisterDims::new(n, t_count + 1)?;
    dims.ensure_within(DEFAULT_MAX_DIM)?;
    let d = dims.d();
    let norm = 1.0 / (n as f64).sqrt();
    // Fourier basis vectors f_1..f_{n-1} span the complement of |s> = f_0.
    let fourier = |j: usize, i: usize| C64::from_polar(norm, 2.0 * PI * (j * i) as f64 / n as f64);

    let mut steps = Vec::with_capacity(t_count + 1);
    steps.push(StepOp::PrepareUniform);
    for t in 1..=t_count {
        let mut u = DMatrix::<C64>::identity(d, d);
        for j in 1..n {
            let mut a = DVector::<C64>::zeros(d);
            for i in 0..n {
                a[dims.index(i + 1, 1)] = fourier(j, i);
            }
            let b_index = dims.index(j, t + 1);
            // U -= |a><a| + |b><b|;  U += |a><b| + |b><a|
            u -= &a * a.adjoint();
            u[(b_index, b_index)] -= C64::new(1.0, 0.0);
            for r in 0..d {
                u[(r, b_index)] += a[r];
                u[(b_index, r)] += a[r].conj();
            }
        }
        steps.push(StepOp::Dense(UnitaryOp::from_parts_unchecked(dims, u)));
    }
    QueryAlgorithm::from_steps(dims, steps, format!("flagged(n={n},T={t_count})"))
}

/// Two-outcome measurement; `projector` is the "k != 0" outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceRule {
    pub projector: DMatrix<C64>,
}

impl AcceptanceRule {
    /// `tr(Pi rho)`.
    pub fn accept_probability(&self, rho: &DMatrix<C64>) -> f64 {
        (&self.projector * rho).trace().re
    }
}

/// `Pi = I - |s, 1><s, 1|`: reject exactly when the state is the untouched
/// uniform start.
pub fn uniform_acceptance_rule(dims: RegisterDims) -> AcceptanceRule {
    let d = dims.d();
    let amp = C64::new(1.0 / (dims.n() as f64).sqrt(), 0.0);
    let mut s = DVector::<C64>::zeros(d);
    for i in 1..=dims.n() {
        s[dims.index(i, 1)] = amp;
    }
    AcceptanceRule { projector: DMatrix::identity(d, d) - &s * s.adjoint() }
}
