//! Test-side generators and reference implementations that do not go
//! through the library's optimized code paths.
#![allow(dead_code)]

use faultq::{DensityMatrix, RandomStream, RegisterDims, StateVector, C64};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(stream: &mut RandomStream) -> C64 {
    let re: f64 = StandardNormal.sample(stream);
    let im: f64 = StandardNormal.sample(stream);
    C64::new(re, im)
}

/// Unit vector drawn uniformly from the sphere.
pub fn random_state(dims: RegisterDims, stream: &mut RandomStream) -> StateVector {
    let v = DVector::from_fn(dims.d(), |_, _| gaussian(stream));
    let norm = v.norm();
    StateVector::new(dims, v / C64::new(norm, 0.0)).unwrap()
}

/// `G G^dagger / tr`, with a random rank between 1 and `d`.
pub fn random_density(dims: RegisterDims, stream: &mut RandomStream) -> DensityMatrix {
    let d = dims.d();
    let rank = 1 + (stream.uniform() * d as f64) as usize % d;
    let g = DMatrix::from_fn(d, rank, |_, _| gaussian(stream));
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    DensityMatrix::new(dims, rho / C64::new(tr, 0.0)).unwrap()
}

/// Dense phase-flip oracle: `-1` on the rows of query value `k`.
pub fn dense_oracle(dims: RegisterDims, k: usize) -> DMatrix<C64> {
    let mut o = DMatrix::identity(dims.d(), dims.d());
    if k > 0 {
        for j in 1..=dims.m() {
            let idx = (k - 1) * dims.m() + (j - 1);
            o[(idx, idx)] = C64::new(-1.0, 0.0);
        }
    }
    o
}

/// `(1-p) O rho O + p rho` by plain matrix products.
pub fn dense_channel(rho: &DMatrix<C64>, dims: RegisterDims, k: usize, p: f64) -> DMatrix<C64> {
    let o = dense_oracle(dims, k);
    (&o * rho * &o) * C64::new(1.0 - p, 0.0) + rho * C64::new(p, 0.0)
}

/// The component of `phi` on query value `k`, embedded in the full space.
pub fn marked_part(phi: &DVector<C64>, dims: RegisterDims, k: usize) -> DVector<C64> {
    DVector::from_fn(dims.d(), |r, _| if r / dims.m() == k - 1 { phi[r] } else { C64::new(0.0, 0.0) })
}

pub fn max_entry_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix through the real symmetric embedding
/// `[[A, -B], [B, A]]`, whose spectrum is that of `A + iB` doubled.
pub fn hermitian_spectrum(h: &DMatrix<C64>) -> Vec<f64> {
    let d = h.nrows();
    let real = DMatrix::<f64>::from_fn(2 * d, 2 * d, |r, c| {
        let (rr, cc) = (r % d, c % d);
        let z = (h[(rr, cc)] + h[(cc, rr)].conj()) * 0.5;
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

pub fn trace_distance_reference(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * hermitian_spectrum(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}
