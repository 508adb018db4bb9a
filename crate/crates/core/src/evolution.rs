//! Running a query algorithm against the faulty oracle.
//!
//! Exact evolution alternates `rho_t = U_t rho^_t U_t^dag` and
//! `rho^_{t+1} = channel(rho_t)`, starting from `rho^_0 = |1,1><1,1|`.
//! Trajectories replace the channel by a sampled choice between the perfect
//! oracle and the identity.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::algorithms::{build_grover, QueryAlgorithm};
use crate::error::{Error, Result};
use crate::linalg::trace_distance_raw;
use crate::oracle::{apply_channel_in_place, apply_perfect_oracle_in_place, FaultyOracleSpec};
use crate::rng::RandomStream;
use crate::state::{DensityMatrix, RegisterDims, StateVector, C64, DEFAULT_MAX_DIM};

/// Trials are grouped in fixed-size chunks so parallel reductions always add
/// in the same order.
const CHUNK: usize = 1024;

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    /// `rho^_t`: state entering `U_t` (after the `t`-th oracle call).
    pub rho_pre: Vec<DensityMatrix>,
    /// `rho_t`: state right after `U_t`.
    pub rho_post: Vec<DensityMatrix>,
    pub spec: FaultyOracleSpec,
    pub algorithm: String,
}

impl SimulationTrace {
    pub fn final_state(&self) -> &DensityMatrix {
        self.rho_post.last().expect("trace holds at least rho_0")
    }
}

fn check_compatible(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<()> {
    alg.dims().ensure_same(&spec.dims())
}

pub fn evolve_exact(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<SimulationTrace> {
    evolve_exact_capped(alg, spec, DEFAULT_MAX_DIM)
}

pub fn evolve_exact_capped(alg: &QueryAlgorithm, spec: &FaultyOracleSpec, max_dim: usize) -> Result<SimulationTrace> {
    check_compatible(alg, spec)?;
    let dims = alg.dims();
    dims.ensure_within(max_dim)?;

    let t_count = alg.t_count();
    let mut rho_pre = Vec::with_capacity(t_count + 1);
    let mut rho_post = Vec::with_capacity(t_count + 1);

    let mut current = alg.initial_state().outer();
    for t in 0..=t_count {
        if t > 0 {
            apply_channel_in_place(spec, &mut current);
        }
        rho_pre.push(DensityMatrix::from_parts_unchecked(dims, current.clone())?);
        current = alg.conjugate_step(t, &current);
        rho_post.push(DensityMatrix::from_parts_unchecked(dims, current.clone())?);
    }
    Ok(SimulationTrace { rho_pre, rho_post, spec: *spec, algorithm: alg.label().to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub final_state: StateVector,
    /// `fault_pattern[t]` is true when oracle call `t + 1` faulted.
    pub fault_pattern: Vec<bool>,
    /// One measurement of the query register, `Some(outcome == k)` for a
    /// marked oracle.
    pub success_sample: Option<bool>,
}

pub fn evolve_trajectory(
    alg: &QueryAlgorithm,
    spec: &FaultyOracleSpec,
    stream: &mut RandomStream,
) -> Result<TrajectoryResult> {
    check_compatible(alg, spec)?;
    let mut amps = alg.initial_state().into_amplitudes();
    alg.apply_step(0, &mut amps);
    let mut fault_pattern = Vec::with_capacity(alg.t_count());
    for t in 1..=alg.t_count() {
        let fault = stream.uniform() < spec.p();
        if !fault {
            apply_perfect_oracle_in_place(spec, &mut amps);
        }
        fault_pattern.push(fault);
        alg.apply_step(t, &mut amps);
    }
    let final_state = StateVector::from_parts_unchecked(alg.dims(), amps);
    let success_sample = (spec.k() > 0).then(|| stream.uniform() < final_state.query_weight(spec.k()));
    Ok(TrajectoryResult { final_state, fault_pattern, success_sample })
}

/// Trace distance between the final states under `spec` and under the null
/// oracle.
pub fn distinguishability(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<f64> {
    if spec.k() == 0 {
        return Err(Error::NullOracle);
    }
    let marked = evolve_exact(alg, spec)?;
    let null = evolve_exact(alg, &spec.null())?;
    Ok(trace_distance_raw(marked.final_state().entries(), null.final_state().entries()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Exact `P(query register reads k)` at the end of the algorithm.
pub fn grover_success_exact(alg: &QueryAlgorithm, spec: &FaultyOracleSpec) -> Result<f64> {
    if spec.k() == 0 {
        return Err(Error::NullOracle);
    }
    Ok(evolve_exact(alg, spec)?.final_state().query_weight(spec.k()))
}

/// Monte-Carlo estimate of `P(query register reads k)`.
///
/// Trial `i` runs on `stream.substream(i)`. Each trajectory contributes its
/// exact conditional probability `|<k|psi>|^2`, which has the same mean as a
/// sampled measurement and lower variance.
pub fn grover_success_probability(
    alg: &QueryAlgorithm,
    spec: &FaultyOracleSpec,
    trials: usize,
    stream: &RandomStream,
) -> Result<SuccessEstimate> {
    if spec.k() == 0 {
        return Err(Error::NullOracle);
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    check_compatible(alg, spec)?;
    let k = spec.k();
    let partials: Vec<Result<(f64, f64)>> = chunk_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in start..end {
                let mut s = stream.substream(i as u64);
                let w = evolve_trajectory(alg, spec, &mut s)?.final_state.query_weight(k);
                sum += w;
                sum_sq += w * w;
            }
            Ok((sum, sum_sq))
        })
        .collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for part in partials {
        let (s, sq) = part?;
        sum += s;
        sum_sq += sq;
    }
    let (mean, stderr) = mean_and_stderr(sum, sum_sq, trials);
    Ok(SuccessEstimate { mean, stderr, trials })
}

/// Entrywise mean of `|psi><psi|` over trajectories, with the standard error
/// of the real and imaginary parts of every entry.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub mean: DMatrix<C64>,
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
    pub trials: usize,
}

pub fn average_trajectory_density(
    alg: &QueryAlgorithm,
    spec: &FaultyOracleSpec,
    trials: usize,
    stream: &RandomStream,
) -> Result<DensityEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    check_compatible(alg, spec)?;
    let d = alg.dims().d();
    type Acc = (DMatrix<C64>, DMatrix<f64>, DMatrix<f64>);
    let partials: Vec<Result<Acc>> = chunk_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut sum = DMatrix::<C64>::zeros(d, d);
            let mut sq_re = DMatrix::<f64>::zeros(d, d);
            let mut sq_im = DMatrix::<f64>::zeros(d, d);
            for i in start..end {
                let mut s = stream.substream(i as u64);
                let outer = evolve_trajectory(alg, spec, &mut s)?.final_state.outer();
                sum += &outer;
                sq_re.zip_apply(&outer, |acc, x| *acc += x.re * x.re);
                sq_im.zip_apply(&outer, |acc, x| *acc += x.im * x.im);
            }
            Ok((sum, sq_re, sq_im))
        })
        .collect();
    let mut sum = DMatrix::<C64>::zeros(d, d);
    let mut sq_re = DMatrix::<f64>::zeros(d, d);
    let mut sq_im = DMatrix::<f64>::zeros(d, d);
    for part in partials {
        let (s, r, i) = part?;
        sum += s;
        sq_re += r;
        sq_im += i;
    }
    let mut stderr_re = DMatrix::zeros(d, d);
    let mut stderr_im = DMatrix::zeros(d, d);
    for c in 0..d {
        for r in 0..d {
            stderr_re[(r, c)] = mean_and_stderr(sum[(r, c)].re, sq_re[(r, c)], trials).1;
            stderr_im[(r, c)] = mean_and_stderr(sum[(r, c)].im, sq_im[(r, c)], trials).1;
        }
    }
    Ok(DensityEstimate { mean: sum.map(|x| x / trials as f64), stderr_re, stderr_im, trials })
}

/// Per-trial first query count at which `|<k|psi>|^2 >= threshold` for
/// Grover's algorithm on `n` items under a `p`-faulty oracle, or `max_t` if
/// the threshold is never reached.
///
/// The walk is symmetric in the marked index, so `k = 1` is used. Trial `i`
/// runs on `stream.substream(i)`.
pub fn walk_hitting_time(
    n: usize,
    p: f64,
    threshold: f64,
    max_t: usize,
    trials: usize,
    stream: &RandomStream,
) -> Result<Vec<usize>> {
    if !(threshold > 1.0 / n as f64 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must lie in (1/n, 1) for n = {n}")));
    }
    let dims = RegisterDims::new(n, 1)?;
    let spec = FaultyOracleSpec::with_limits(dims, 1, p)?;
    // Only U_0 and one diffusion are needed; every later step repeats it.
    let alg = build_grover(n, 1)?;

    let hits = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = stream.substream(i as u64);
            let mut amps: DVector<C64> = alg.initial_state().into_amplitudes();
            alg.apply_step(0, &mut amps);
            for t in 1..=max_t {
                if s.uniform() >= p {
                    apply_perfect_oracle_in_place(&spec, &mut amps);
                }
                alg.apply_step(1, &mut amps);
                if amps[0].norm_sqr() >= threshold {
                    return t;
                }
            }
            max_t
        })
        .collect();
    Ok(hits)
}

/// Median of integer samples; mean of the middle pair for even counts.
pub fn median(values: &[usize]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid] as f64
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid]) as f64
    }
}

fn chunk_ranges(trials: usize) -> Vec<(usize, usize)> {
    (0..trials).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(trials))).collect()
}

fn mean_and_stderr(sum: f64, sum_sq: f64, count: usize) -> (f64, f64) {
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{build_random_algorithm, StepOp};
    use crate::state::UnitaryOp;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `U_0` prepares `|+>`, `U_1 = I`.
    fn single_query_n2() -> QueryAlgorithm {
        let dims = RegisterDims::new(2, 1).unwrap();
        QueryAlgorithm::from_steps(dims, vec![StepOp::PrepareUniform, StepOp::Dense(UnitaryOp::identity(dims))], "n2")
            .unwrap()
    }

    #[test]
    fn null_oracle_keeps_states_pure() {
        let dims = RegisterDims::new(3, 2).unwrap();
        let alg = build_random_algorithm(dims, 6, &mut RandomStream::new(4, 0)).unwrap();
        let spec = FaultyOracleSpec::new(dims, 0, 0.4).unwrap();
        let trace = evolve_exact(&alg, &spec).unwrap();
        for rho in &trace.rho_post {
            assert_eq!(rho.rank(1e-9), 1);
        }
    }

    #[test]
    fn fault_free_limit_matches_state_vector() {
        let dims = RegisterDims::new(3, 2).unwrap();
        let alg = build_random_algorithm(dims, 5, &mut RandomStream::new(8, 1)).unwrap();
        let spec = FaultyOracleSpec::with_limits(dims, 2, 0.0).unwrap();
        let trace = evolve_exact(&alg, &spec).unwrap();
        let oracle = crate::oracle::perfect_oracle(&spec);
        let mut v = alg.initial_state().into_amplitudes();
        for t in 0..=alg.t_count() {
            if t > 0 {
                v = oracle.entries() * v;
            }
            v = alg.unitary(t).entries() * v;
            assert!(max_abs_diff(trace.rho_post[t].entries(), &(&v * v.adjoint())) < 1e-10);
        }
    }

    #[test]
    fn single_query_half_fault_gives_mixed() {
        let alg = single_query_n2();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let trace = evolve_exact(&alg, &spec).unwrap();
        let half = DMatrix::identity(2, 2).map(|x: C64| x * 0.5);
        assert!(max_abs_diff(trace.rho_post[1].entries(), &half) < 1e-15);
    }

    #[test]
    fn trace_recurrences_and_invariants() {
        let dims = RegisterDims::new(4, 2).unwrap();
        let alg = build_random_algorithm(dims, 8, &mut RandomStream::new(2, 2)).unwrap();
        let spec = FaultyOracleSpec::new(dims, 3, 0.3).unwrap();
        let trace = evolve_exact(&alg, &spec).unwrap();
        assert_eq!(trace.rho_pre.len(), 9);
        assert_eq!(trace.rho_pre[0].entries(), &alg.initial_state().outer());
        for t in 0..=8 {
            trace.rho_post[t].validate().unwrap();
            let u = alg.unitary(t);
            let expected = u.entries() * trace.rho_pre[t].entries() * u.entries().adjoint();
            assert!(max_abs_diff(trace.rho_post[t].entries(), &expected) < 1e-10);
            if t < 8 {
                let next = crate::oracle::apply_faulty_channel(&trace.rho_post[t], &spec).unwrap();
                assert!(max_abs_diff(trace.rho_pre[t + 1].entries(), next.entries()) < 1e-10);
            }
        }
    }

    #[test]
    fn evolve_exact_errors() {
        let alg = build_grover(4, 1).unwrap();
        let wrong = FaultyOracleSpec::new(RegisterDims::new(5, 1).unwrap(), 1, 0.5).unwrap();
        assert!(matches!(evolve_exact(&alg, &wrong), Err(Error::DimensionMismatch { .. })));
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        assert!(matches!(evolve_exact_capped(&alg, &spec, 3), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn trajectory_extreme_patterns() {
        let dims = RegisterDims::new(3, 2).unwrap();
        let alg = build_random_algorithm(dims, 4, &mut RandomStream::new(6, 0)).unwrap();
        let mut stream = RandomStream::new(0, 0);

        let always = FaultyOracleSpec::with_limits(dims, 2, 1.0).unwrap();
        let res = evolve_trajectory(&alg, &always, &mut stream).unwrap();
        assert_eq!(res.fault_pattern, vec![true; 4]);
        let mut v = alg.initial_state().into_amplitudes();
        for t in 0..=4 {
            v = alg.unitary(t).entries() * v;
        }
        assert!((res.final_state.amplitudes() - &v).norm() < 1e-12);

        let never = FaultyOracleSpec::with_limits(dims, 2, 0.0).unwrap();
        let res = evolve_trajectory(&alg, &never, &mut stream).unwrap();
        assert_eq!(res.fault_pattern, vec![false; 4]);
        let exact = evolve_exact(&alg, &never).unwrap();
        assert!(max_abs_diff(exact.final_state().entries(), &res.final_state.outer()) < 1e-12);
        assert!((res.final_state.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distinguishability_examples() {
        let grover0 = build_grover(4, 0).unwrap();
        let spec = FaultyOracleSpec::new(grover0.dims(), 1, 0.3).unwrap();
        assert!(distinguishability(&grover0, &spec).unwrap().abs() < 1e-12);

        let grover1 = build_grover(4, 1).unwrap();
        let fault_free = FaultyOracleSpec::with_limits(grover1.dims(), 1, 0.0).unwrap();
        let d = distinguishability(&grover1, &fault_free).unwrap();
        assert!((d - 3f64.sqrt() / 2.0).abs() < 1e-10, "{d}");

        let inert = FaultyOracleSpec::with_limits(grover1.dims(), 2, 1.0).unwrap();
        assert!(distinguishability(&grover1, &inert).unwrap().abs() < 1e-10);

        assert_eq!(distinguishability(&grover1, &spec.null()), Err(Error::NullOracle));
    }

    #[test]
    fn distinguishability_under_common_post_processing() {
        let dims = RegisterDims::new(3, 2).unwrap();
        let alg = build_random_algorithm(dims, 3, &mut RandomStream::new(12, 0)).unwrap();
        let post = crate::linalg::haar_random_matrix(dims.d(), &mut RandomStream::new(12, 1));
        let mut steps: Vec<StepOp> = (0..3).map(|t| alg.step(t).clone()).collect();
        steps.push(StepOp::Dense(UnitaryOp::new(dims, &post * alg.unitary(3).entries()).unwrap()));
        let rotated = QueryAlgorithm::from_steps(dims, steps, "rotated").unwrap();
        let common = FaultyOracleSpec::new(dims, 2, 0.5).unwrap();
        for k in 1..=3 {
            let spec = FaultyOracleSpec::new(dims, k, 0.6).unwrap();
            let before = distinguishability(&alg, &spec).unwrap();
            let after = distinguishability(&rotated, &spec).unwrap();
            assert!((after - before).abs() < 1e-9, "k={k}: {after} vs {before}");

            let mut marked = evolve_exact(&alg, &spec).unwrap().final_state().entries().clone();
            let mut null = evolve_exact(&alg, &spec.null()).unwrap().final_state().entries().clone();
            apply_channel_in_place(&common, &mut marked);
            apply_channel_in_place(&common, &mut null);
            assert!(trace_distance_raw(&marked, &null) <= before + 1e-9);
        }
    }

    #[test]
    fn success_probability_anchors() {
        let stream = RandomStream::new(42, 0);
        let g1 = build_grover(4, 1).unwrap();
        let fault_free = FaultyOracleSpec::with_limits(g1.dims(), 1, 0.0).unwrap();
        assert!((grover_success_exact(&g1, &fault_free).unwrap() - 1.0).abs() < 1e-9);
        let est = grover_success_probability(&g1, &fault_free, 100, &stream).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-9);

        let g0 = build_grover(4, 0).unwrap();
        let spec = FaultyOracleSpec::new(g0.dims(), 1, 0.5).unwrap();
        let est = grover_success_probability(&g0, &spec, 100, &stream).unwrap();
        assert!((est.mean - 0.25).abs() < 1e-12);

        let g5 = build_grover(4, 5).unwrap();
        let inert = FaultyOracleSpec::with_limits(g5.dims(), 1, 1.0).unwrap();
        assert!((grover_success_exact(&g5, &inert).unwrap() - 0.25).abs() < 1e-12);
        let est = grover_success_probability(&g5, &inert, 50, &stream).unwrap();
        assert!((est.mean - 0.25).abs() < 1e-12);

        assert!(grover_success_probability(&g5, &inert, 0, &stream).is_err());
    }

    #[test]
    fn success_probability_matches_exact_statistically() {
        let alg = build_grover(4, 3).unwrap();
        let spec = FaultyOracleSpec::new(alg.dims(), 1, 0.5).unwrap();
        let exact = grover_success_exact(&alg, &spec).unwrap();
        let est = grover_success_probability(&alg, &spec, 100_000, &RandomStream::new(42, 1)).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{} vs {exact} (se {})", est.mean, est.stderr);
    }

    #[test]
    fn hitting_time_limits() {
        let stream = RandomStream::new(42, 0);
        let hits = walk_hitting_time(64, 1.0, 0.5, 50, 10, &stream).unwrap();
        assert!(hits.iter().all(|&h| h == 50));

        for (n, threshold) in [(64usize, 0.5f64), (64, 0.9), (256, 0.5), (1024, 0.75)] {
            let theta = (1.0 / (n as f64).sqrt()).asin();
            let expected = (threshold.sqrt().asin() / (2.0 * theta) - 0.5).ceil() as usize;
            let hits = walk_hitting_time(n, 0.0, threshold, 10 * n, 3, &stream).unwrap();
            assert!(hits.iter().all(|&h| h == expected), "n={n}: {hits:?} vs {expected}");
        }

        assert!(walk_hitting_time(4, 0.5, 0.2, 10, 1, &stream).is_err());
        assert!(walk_hitting_time(4, 0.5, 1.0, 10, 1, &stream).is_err());
    }

    #[test]
    fn hitting_times_deterministic() {
        let stream = RandomStream::new(7, 3);
        let a = walk_hitting_time(64, 0.5, 0.5, 4096, 20, &stream).unwrap();
        let b = walk_hitting_time(64, 0.5, 0.5, 4096, 20, &stream).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn median_of_samples() {
        assert_eq!(median(&[3, 1, 2]), 2.0);
        assert_eq!(median(&[4, 1, 3, 2]), 2.5);
    }

    #[test]
    fn plus_state_helper_is_normalized() {
        let alg = single_query_n2();
        let mut v = alg.initial_state().into_amplitudes();
        alg.apply_step(0, &mut v);
        assert!((v[0].re - FRAC_1_SQRT_2).abs() < 1e-15 && (v[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
    }
}
