//! Pure-state tracking and the progress measure for the lower bound.
//!
//! For a marked index `k` the tracking vectors follow the "no leak" branch of
//! every oracle call:
//!
//! ```text
//! psi~_0     = |1, 1>
//! psi_t      = U_t psi~_t
//! psi~_{t+1} = psi_t - 2(1-p) |k, beta_{t,k}>
//! ```
//!
//! while the null run (`k = 0`) is plain unitary evolution. The true state is
//! `rho_t = |psi_t><psi_t| + R_t` with `R_t` positive semidefinite, and the
//! progress measure is `H_t = || psi^0_t - psi^k_t ||^2`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algorithms::QueryAlgorithm;
use crate::error::{Error, Result};
use crate::evolution::{evolve_exact, SimulationTrace};
use crate::linalg::{hermitian_eigenvalues, max_abs, trace_distance_raw};
use crate::oracle::{apply_channel_in_place, lemma_decompose, FaultyOracleSpec};
use crate::state::{DensityMatrix, RegisterDims, StateVector, C64, DEFAULT_MAX_DIM};

/// Absolute slack for every lemma inequality.
pub const LEMMA_TOL: f64 = 1e-9;
/// Entrywise slack for the channel decomposition identity.
pub const DECOMPOSE_TOL: f64 = 1e-10;
/// Slack between the tracking recursion and the decomposition's pure part.
pub const RECURSION_TOL: f64 = 1e-12;
/// Trace distance a correct algorithm must reach.
pub const CORRECTNESS_DISTANCE: f64 = 0.9;
/// Lower bound on `H_T` implied by correctness.
pub const FINAL_PROGRESS: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct TrackingTrace {
    pub psi: Vec<StateVector>,
    pub psi_tilde: Vec<StateVector>,
    pub psi_null: Vec<StateVector>,
    pub k: usize,
    pub p: f64,
    pub dims: RegisterDims,
}

impl TrackingTrace {
    pub fn t_count(&self) -> usize {
        self.psi.len() - 1
    }
}

pub fn track_states(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<TrackingTrace> {
    alg.dims().ensure_same(&spec.dims())?;
    if spec.k() == 0 {
        return Err(Error::NullOracle);
    }
    let dims = alg.dims();
    let t_count = alg.t_count();
    let shrink = 1.0 - 2.0 * (1.0 - spec.p());
    let marked = dims.index(spec.k(), 1)..dims.index(spec.k(), 1) + dims.m();

    let mut psi = Vec::with_capacity(t_count + 1);
    let mut psi_tilde = Vec::with_capacity(t_count + 1);
    let mut psi_null = Vec::with_capacity(t_count + 1);

    let start = alg.initial_state().into_amplitudes();
    let mut tilde = start.clone();
    let mut null = start;
    alg.apply_step(0, &mut null);
    for t in 0..=t_count {
        psi_tilde.push(StateVector::from_parts_unchecked(dims, tilde.clone()));
        let mut current = tilde;
        alg.apply_step(t, &mut current);
        if t > 0 {
            alg.apply_step(t, &mut null);
        }
        psi.push(StateVector::from_parts_unchecked(dims, current.clone()));
        psi_null.push(StateVector::from_parts_unchecked(dims, null.clone()));
        // psi_t - 2(1-p)|k, beta_{t,k}> only rescales the marked block.
        for a in marked.clone() {
            current[a] *= shrink;
        }
        tilde = current;
    }
    Ok(TrackingTrace { psi, psi_tilde, psi_null, k: spec.k(), p: spec.p(), dims })
}

#[derive(Debug, Clone)]
pub struct Residue {
    pub matrix: DMatrix<C64>,
    pub min_eig: f64,
    pub trace: f64,
}

/// `R = rho - |psi><psi|` and its smallest eigenvalue.
pub fn residue(rho: &DensityMatrix, psi: &StateVector) -> Result<Residue> {
    rho.dims().ensure_same(&psi.dims())?;
    let matrix = rho.entries() - psi.outer();
    let min_eig = hermitian_eigenvalues(&matrix).into_iter().fold(f64::INFINITY, f64::min);
    let trace = matrix.trace().re;
    Ok(Residue { matrix, min_eig, trace })
}

#[derive(Debug, Clone)]
pub struct ProgressTrace {
    pub k: usize,
    pub p: f64,
    /// `H_t`, computed directly from the tracking vectors.
    pub h: Vec<f64>,
    /// `H_{t+1} - H_t` for `t < T`.
    pub increments: Vec<f64>,
    /// `((1-p)/p) ||beta^0_{t,k}||^2` for `t < T`.
    pub bounds: Vec<f64>,
    /// `||beta^0_{t,k}||^2` for `t <= T`.
    pub null_block_weight: Vec<f64>,
    /// `<psi^0_t | psi^k_t>`.
    pub null_overlap: Vec<C64>,
    pub psi_norm_sqr: Vec<f64>,
    pub null_norm_sqr: Vec<f64>,
    /// Filled by [`ProgressTrace::attach_residues`]; empty otherwise.
    pub residue_min_eig: Vec<f64>,
    pub residue_trace: Vec<f64>,
}

impl ProgressTrace {
    pub fn t_count(&self) -> usize {
        self.h.len() - 1
    }

    pub fn h_final(&self) -> f64 {
        *self.h.last().expect("at least H_0")
    }

    /// Records `R_t = rho_t - |psi_t><psi_t|` along an exact trace of the
    /// same algorithm and oracle.
    pub fn attach_residues(&mut self, tracking: &TrackingTrace, sim: &SimulationTrace) -> Result<()> {
        if sim.rho_post.len() != tracking.psi.len() {
            return Err(Error::DimensionMismatch { expected: tracking.psi.len(), found: sim.rho_post.len() });
        }
        if sim.spec.k() != tracking.k || sim.spec.p() != tracking.p {
            return Err(Error::InvalidArgument("simulation and tracking use different oracles".into()));
        }
        let (mins, traces) = sim
            .rho_post
            .iter()
            .zip(&tracking.psi)
            .map(|(rho, psi)| residue(rho, psi).map(|r| (r.min_eig, r.trace)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        self.residue_min_eig = mins;
        self.residue_trace = traces;
        Ok(())
    }
}

pub fn progress_measure(trace: &TrackingTrace) -> ProgressTrace {
    let t_count = trace.t_count();
    let scale = (1.0 - trace.p) / trace.p;
    let h: Vec<f64> = trace
        .psi
        .iter()
        .zip(&trace.psi_null)
        .map(|(psi, null)| (null.amplitudes() - psi.amplitudes()).norm_squared())
        .collect();
    let increments = h.windows(2).map(|w| w[1] - w[0]).collect();
    let null_block_weight: Vec<f64> = trace.psi_null.iter().map(|null| null.query_weight(trace.k)).collect();
    let bounds = null_block_weight[..t_count].iter().map(|w| scale * w).collect();
    ProgressTrace {
        k: trace.k,
        p: trace.p,
        h,
        increments,
        bounds,
        null_block_weight,
        null_overlap: trace.psi.iter().zip(&trace.psi_null).map(|(psi, null)| null.inner(psi)).collect(),
        psi_norm_sqr: trace.psi.iter().map(StateVector::norm_sqr).collect(),
        null_norm_sqr: trace.psi_null.iter().map(StateVector::norm_sqr).collect(),
        residue_min_eig: Vec::new(),
        residue_trace: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalBoundStatus {
    /// The algorithm does not reach the correctness distance; nothing to check.
    NotApplicable,
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FinalBoundReport {
    pub status: FinalBoundStatus,
    pub distinguishability: f64,
    pub h_final: f64,
    pub overlap_abs: f64,
    /// `1 - 2 |<psi^0_T | psi^k_T>|`.
    pub chain_lower: f64,
    pub chain_holds: bool,
    /// `|H_T - (||psi^0||^2 + ||psi^k||^2 - 2 Re<psi^0|psi^k>)|`.
    pub identity_error: f64,
}

impl FinalBoundReport {
    pub fn holds(&self) -> bool {
        self.status != FinalBoundStatus::Violated && self.chain_holds && self.identity_error <= DECOMPOSE_TOL
    }
}

/// If `d_final >= 9/10` then `H_T > 1/10`; the chain
/// `H_T >= 1 - 2|<psi^0_T|psi^k_T>|` is checked unconditionally.
pub fn final_bound_check(progress: &ProgressTrace, d_final: f64) -> FinalBoundReport {
    let t = progress.t_count();
    let h_final = progress.h_final();
    let overlap = progress.null_overlap[t];
    let expanded = progress.null_norm_sqr[t] + progress.psi_norm_sqr[t] - 2.0 * overlap.re;
    let chain_lower = 1.0 - 2.0 * overlap.norm();
    let status = if d_final < CORRECTNESS_DISTANCE {
        FinalBoundStatus::NotApplicable
    } else if h_final > FINAL_PROGRESS {
        FinalBoundStatus::Holds
    } else {
        FinalBoundStatus::Violated
    };
    FinalBoundReport {
        status,
        distinguishability: d_final,
        h_final,
        overlap_abs: overlap.norm(),
        chain_lower,
        chain_holds: h_final >= chain_lower - LEMMA_TOL,
        identity_error: (h_final - expanded).abs(),
    }
}

/// `p N / (10 (1 - p))`: correct algorithms need strictly more queries.
pub fn theorem_threshold(n: usize, p: f64) -> f64 {
    p * n as f64 / (10.0 * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MarkedSummary {
    pub k: usize,
    pub h_final: f64,
    pub distinguishability: f64,
    /// `sum_{t<T} ||beta^0_{t,k}||^2`.
    pub null_weight_sum: f64,
    pub final_bound: FinalBoundReport,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TheoremReport {
    pub n: usize,
    pub t_count: usize,
    pub p: f64,
    pub per_k: Vec<MarkedSummary>,
    /// `sum_k sum_{t<T} ||beta^0_{t,k}||^2`, which must equal `T`.
    pub null_weight_total: f64,
    pub sum_h: f64,
    /// `((1-p)/p) T`.
    pub budget: f64,
    pub threshold: f64,
    /// Every `k` reaches the correctness distance.
    pub all_correct: bool,
    pub identity_holds: bool,
    pub budget_holds: bool,
    /// `T > threshold`, checked only when `all_correct`.
    pub query_bound_holds: Option<bool>,
}

impl TheoremReport {
    pub fn holds(&self) -> bool {
        self.identity_holds
            && self.budget_holds
            && self.query_bound_holds.unwrap_or(true)
            && self.per_k.iter().all(|s| s.final_bound.holds())
    }
}

/// Runs the tracking and the exact evolution for every `k` in `1..=n` and
/// checks the aggregate inequalities.
pub fn aggregate_theorem_check(alg: &QueryAlgorithm, p: f64) -> Result<TheoremReport> {
    let dims = alg.dims();
    dims.ensure_within(DEFAULT_MAX_DIM)?;
    let null_spec = FaultyOracleSpec::new(dims, 0, p)?;
    let null_final = evolve_exact(alg, &null_spec)?.final_state().entries().clone();
    let t_count = alg.t_count();

    let per_k = (1..=dims.n())
        .into_par_iter()
        .map(|k| {
            let spec = null_spec.with_k(k)?;
            let progress = progress_measure(&track_states(alg, &spec)?);
            let sim = evolve_exact(alg, &spec)?;
            let d_final = trace_distance_raw(sim.final_state().entries(), &null_final);
            Ok(MarkedSummary {
                k,
                h_final: progress.h_final(),
                distinguishability: d_final,
                null_weight_sum: progress.null_block_weight[..t_count].iter().sum(),
                final_bound: final_bound_check(&progress, d_final),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let t = t_count as f64;
    let null_weight_total: f64 = per_k.iter().map(|s| s.null_weight_sum).sum();
    let sum_h: f64 = per_k.iter().map(|s| s.h_final).sum();
    let budget = (1.0 - p) / p * t;
    let threshold = theorem_threshold(dims.n(), p);
    let all_correct = per_k.iter().all(|s| s.distinguishability >= CORRECTNESS_DISTANCE);
    let slack = 1e-8 * t.max(1.0);
    Ok(TheoremReport {
        n: dims.n(),
        t_count,
        p,
        identity_holds: (null_weight_total - t).abs() <= slack,
        budget_holds: sum_h <= budget + slack,
        query_bound_holds: all_correct.then_some(t > threshold),
        per_k,
        null_weight_total,
        sum_h,
        budget,
        threshold,
        all_correct,
    })
}

/// Per-step record of one (algorithm, k, p) instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCheck {
    pub t: usize,
    pub h: f64,
    /// `H_t - H_{t-1}`, zero at `t = 0`.
    pub increment: f64,
    /// Bound on `increment`, zero at `t = 0`.
    pub bound: f64,
    pub residue_min_eig: f64,
    pub residue_trace: f64,
    pub psi_norm: f64,
}

impl StepCheck {
    pub fn margin(&self) -> f64 {
        self.bound - self.increment
    }
}

#[derive(Debug, Clone)]
pub struct InstanceCheck {
    pub k: usize,
    pub p: f64,
    pub steps: Vec<StepCheck>,
    pub final_bound: FinalBoundReport,
    /// Human-readable description of every violated check.
    pub violations: Vec<String>,
}

/// Every per-instance check: channel decomposition, tracking recursion,
/// residue positivity and trace, increment bounds, `H_0 = 0`, the range of
/// `H_t`, and the final-bound chain.
pub fn check_instance(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<InstanceCheck> {
    let tracking = track_states(alg, spec)?;
    let sim = evolve_exact(alg, spec)?;
    let null_sim = evolve_exact(alg, &spec.null())?;
    let mut progress = progress_measure(&tracking);
    progress.attach_residues(&tracking, &sim)?;
    let d_final = trace_distance_raw(sim.final_state().entries(), null_sim.final_state().entries());
    let final_bound = final_bound_check(&progress, d_final);

    let t_count = tracking.t_count();
    let mut violations = Vec::new();
    let mut fail = |msg: String| violations.push(msg);

    if progress.h[0] != 0.0 {
        fail(format!("H_0 = {:e} is not zero", progress.h[0]));
    }
    for t in 0..=t_count {
        let psi = &tracking.psi[t];
        if progress.residue_min_eig[t] < -LEMMA_TOL {
            fail(format!("t={t}: residue min eigenvalue {:e}", progress.residue_min_eig[t]));
        }
        let trace_err = (progress.residue_trace[t] - (1.0 - psi.norm_sqr())).abs();
        if trace_err > LEMMA_TOL {
            fail(format!("t={t}: residue trace off by {trace_err:e}"));
        }
        if !(-LEMMA_TOL..=4.0 + LEMMA_TOL).contains(&progress.h[t]) {
            fail(format!("t={t}: H = {} outside [0, 4]", progress.h[t]));
        }
        if (progress.null_norm_sqr[t] - 1.0).abs() > LEMMA_TOL {
            fail(format!("t={t}: null tracking vector has squared norm {}", progress.null_norm_sqr[t]));
        }
        if t < t_count {
            if progress.increments[t] > progress.bounds[t] + LEMMA_TOL {
                fail(format!("t={t}: increment {:e} exceeds bound {:e}", progress.increments[t], progress.bounds[t]));
            }
            if progress.psi_norm_sqr[t + 1].sqrt() > progress.psi_norm_sqr[t].sqrt() + 1e-12 {
                fail(format!("t={t}: tracking norm grew"));
            }
            let decomposed = lemma_decompose(psi, spec)?;
            let recursion_err = max_abs(&(decomposed.phi_tilde.amplitudes() - tracking.psi_tilde[t + 1].amplitudes()));
            if recursion_err > RECURSION_TOL {
                fail(format!("t={t}: recursion differs from decomposition by {recursion_err:e}"));
            }
            let mut channel_out = psi.outer();
            apply_channel_in_place(spec, &mut channel_out);
            let decompose_err = max_abs(&(channel_out - decomposed.reconstruct()));
            if decompose_err > DECOMPOSE_TOL {
                fail(format!("t={t}: channel decomposition error {decompose_err:e}"));
            }
        }
    }
    if !final_bound.chain_holds {
        fail(format!("H_T = {} below 1 - 2|<psi0|psik>| = {}", final_bound.h_final, final_bound.chain_lower));
    }
    if final_bound.identity_error > DECOMPOSE_TOL {
        fail(format!("H_T expansion error {:e}", final_bound.identity_error));
    }
    if final_bound.status == FinalBoundStatus::Violated {
        fail(format!("distinguishability {} but H_T = {} <= 1/10", d_final, final_bound.h_final));
    }

    let steps = (0..=t_count)
        .map(|t| StepCheck {
            t,
            h: progress.h[t],
            increment: if t == 0 { 0.0 } else { progress.increments[t - 1] },
            bound: if t == 0 { 0.0 } else { progress.bounds[t - 1] },
            residue_min_eig: progress.residue_min_eig[t],
            residue_trace: progress.residue_trace[t],
            psi_norm: progress.psi_norm_sqr[t].sqrt(),
        })
        .collect();
    Ok(InstanceCheck { k: spec.k(), p: spec.p(), steps, final_bound, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{build_grover, build_random_algorithm, StepOp};
    use crate::rng::RandomStream;
    use crate::state::UnitaryOp;
    use nalgebra::DVector;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn single_query_n2() -> QueryAlgorithm {
        let dims = RegisterDims::new(2, 1).unwrap();
        QueryAlgorithm::from_steps(dims, vec![StepOp::PrepareUniform, StepOp::Dense(UnitaryOp::identity(dims))], "n2")
            .unwrap()
    }

    fn close(a: &DVector<C64>, b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, &y)| (x - C64::new(y, 0.0)).norm() < 1e-14)
    }

    #[test]
    fn tracking_hand_example() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let tr = track_states(&alg, &spec).unwrap();
        assert!(close(tr.psi[0].amplitudes(), &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]));
        assert_eq!(tr.psi[0], tr.psi_null[0]);
        assert!(close(tr.psi_tilde[1].amplitudes(), &[0.0, FRAC_1_SQRT_2]));
        assert!(close(tr.psi[1].amplitudes(), &[0.0, FRAC_1_SQRT_2]));
        assert!(close(tr.psi_null[1].amplitudes(), &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]));
        // 1 - 4p(1-p) ||beta_{0,1}||^2
        assert!((tr.psi[1].norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tracking_rejects_null() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 0, 0.5).unwrap();
        assert!(matches!(track_states(&alg, &spec), Err(Error::NullOracle)));
    }

    #[test]
    fn tracking_starts_like_null_run() {
        let dims = RegisterDims::new(4, 2).unwrap();
        let alg = build_random_algorithm(dims, 4, &mut RandomStream::new(1, 0)).unwrap();
        for k in 1..=4 {
            let tr = track_states(&alg, &FaultyOracleSpec::new(dims, k, 0.3).unwrap()).unwrap();
            assert_eq!(tr.psi[0], tr.psi_null[0]);
            let mut v = alg.initial_state().into_amplitudes();
            alg.apply_step(0, &mut v);
            assert_eq!(tr.psi[0].amplitudes(), &v);
        }
    }

    #[test]
    fn residue_hand_example() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let tr = track_states(&alg, &spec).unwrap();
        let sim = evolve_exact(&alg, &spec).unwrap();

        let r0 = residue(&sim.rho_post[0], &tr.psi[0]).unwrap();
        assert!(max_abs(&r0.matrix) < 1e-15);
        assert!(r0.min_eig.abs() < 1e-15);

        let r1 = residue(&sim.rho_post[1], &tr.psi[1]).unwrap();
        let expected =
            DMatrix::from_row_slice(2, 2, &[C64::new(0.5, 0.0), C64::default(), C64::default(), C64::default()]);
        assert!(max_abs(&(&r1.matrix - expected)) < 1e-15);
        assert!(r1.min_eig.abs() < 1e-15);
    }

    #[test]
    fn progress_tight_case() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let pr = progress_measure(&track_states(&alg, &spec).unwrap());
        assert_eq!(pr.h[0], 0.0);
        assert!((pr.h[1] - 0.5).abs() < 1e-15);
        assert!((pr.bounds[0] - 0.5).abs() < 1e-15);
        assert!((pr.increments[0] - pr.bounds[0]).abs() < 1e-10);
    }

    #[test]
    fn progress_high_fault_rate() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.9).unwrap();
        let pr = progress_measure(&track_states(&alg, &spec).unwrap());
        // psi_1 = |+> - 0.2 (1/sqrt2)|1>, so H_1 = 0.04 / 2.
        assert!((pr.h[1] - 0.02).abs() < 1e-15);
        assert!((pr.bounds[0] - 0.1 / 0.9 * 0.5).abs() < 1e-15);
        assert!(pr.increments[0] <= pr.bounds[0] + 1e-9);
    }

    #[test]
    fn final_bound_not_applicable_below_threshold() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let pr = progress_measure(&track_states(&alg, &spec).unwrap());
        let report = final_bound_check(&pr, 0.5);
        assert_eq!(report.status, FinalBoundStatus::NotApplicable);
        assert!(report.chain_holds);
        assert!(report.identity_error < 1e-10);
        assert!(report.holds());
    }

    #[test]
    fn theorem_threshold_values() {
        assert!((theorem_threshold(100, 0.5) - 10.0).abs() < 1e-12);
        assert!((theorem_threshold(100, 0.9) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_on_grover() {
        let alg = build_grover(8, 3).unwrap();
        let report = aggregate_theorem_check(&alg, 0.5).unwrap();
        assert_eq!(report.per_k.len(), 8);
        assert!((report.null_weight_total - 3.0).abs() < 1e-8 * 3.0);
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn instance_checks_pass_on_random_algorithm() {
        let dims = RegisterDims::new(4, 2).unwrap();
        let alg = build_random_algorithm(dims, 10, &mut RandomStream::new(42, 0)).unwrap();
        for p in [0.1, 0.3, 0.5, 0.9] {
            for k in 1..=4 {
                let check = check_instance(&alg, &FaultyOracleSpec::new(dims, k, p).unwrap()).unwrap();
                assert!(check.violations.is_empty(), "{:?}", check.violations);
                assert_eq!(check.steps.len(), 11);
            }
        }
    }
}
