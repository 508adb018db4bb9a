//! The four experiment commands. Each returns a [`Report`] plus the list of
//! failed checks; rendering and exit codes are handled by the caller.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{AlgorithmKind, CommandKind, ExperimentConfig};
use super::output::{Cell, Report};
use crate::algorithms::{build_flagged_search, build_grover, build_random_algorithm, QueryAlgorithm};
use crate::evolution::{evolve_exact_capped, grover_success_probability, median, walk_hitting_time};
use crate::oracle::FaultyOracleSpec;
use crate::progress::{
    aggregate_theorem_check, check_instance, theorem_threshold, FinalBoundStatus, InstanceCheck, TheoremReport,
};
use crate::rng::RandomStream;
use crate::state::RegisterDims;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_command(config: &ExperimentConfig) -> Result<Outcome> {
    match config.command {
        CommandKind::Verify => verify(config),
        CommandKind::GroverSweep => grover_sweep(config),
        CommandKind::Walk => walk(config),
        CommandKind::BoundReport => bound_report(config),
    }
}

/// The algorithm analysed for one seed. Only the random family depends on it.
fn build_algorithm(config: &ExperimentConfig, seed: u64) -> Result<QueryAlgorithm> {
    match config.alg.unwrap_or(AlgorithmKind::Grover) {
        AlgorithmKind::Random => {
            let dims = RegisterDims::new(config.n, config.m)?;
            build_random_algorithm(dims, config.t_max, &mut RandomStream::new(seed, 0))
        }
        AlgorithmKind::Grover => build_grover(config.n, config.t_max),
        AlgorithmKind::Flagged => build_flagged_search(config.n, config.t_max),
    }
}

/// Seeds of the verification grid: `seed, seed + 1, ...` for random
/// algorithms, the base seed alone for the deterministic ones.
fn grid_seeds(config: &ExperimentConfig) -> Vec<u64> {
    let count = match config.alg {
        Some(AlgorithmKind::Random) => config.trials as u64,
        _ => 1,
    };
    (0..count).map(|i| config.seed.wrapping_add(i)).collect()
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn verify(config: &ExperimentConfig) -> Result<Outcome> {
    let seeds = grid_seeds(config);
    let algorithms: Vec<(u64, QueryAlgorithm)> =
        seeds.iter().map(|&s| Ok((s, build_algorithm(config, s)?))).collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    let mut agg_tasks = Vec::new();
    for a in 0..algorithms.len() {
        for &p in &config.p {
            agg_tasks.push((a, p));
            for k in 1..=config.n {
                tasks.push((a, p, k));
            }
        }
    }
    let instances: Vec<(u64, InstanceCheck)> = tasks
        .par_iter()
        .map(|&(a, p, k)| {
            let (seed, alg) = &algorithms[a];
            let spec = FaultyOracleSpec::new(alg.dims(), k, p)?;
            Ok((*seed, check_instance(alg, &spec)?))
        })
        .collect::<Result<_>>()?;
    let theorems: Vec<(u64, f64, TheoremReport)> = agg_tasks
        .par_iter()
        .map(|&(a, p)| {
            let (seed, alg) = &algorithms[a];
            Ok((*seed, p, aggregate_theorem_check(alg, p)?))
        })
        .collect::<Result<_>>()?;

    let hash = config.hash();
    let mut keyed = Vec::new();
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut min_residue = f64::INFINITY;
    for (seed, inst) in &instances {
        for v in &inst.violations {
            failures.push(format!("seed={seed} k={} p={}: {v}", inst.k, inst.p));
        }
        for s in &inst.steps {
            if s.t > 0 {
                min_margin = min_margin.min(s.margin());
            }
            min_residue = min_residue.min(s.residue_min_eig);
            keyed.push((
                (inst.p, inst.k, s.t, *seed),
                vec![
                    Cell::Int(*seed),
                    Cell::Int(inst.k as u64),
                    Cell::Float(inst.p),
                    Cell::Int(s.t as u64),
                    Cell::Float(s.h),
                    Cell::Float(s.increment),
                    Cell::Float(s.bound),
                    Cell::Float(s.margin()),
                    Cell::Float(s.residue_min_eig),
                    Cell::Float(s.psi_norm),
                    Cell::Text(hash.clone()),
                ],
            ));
        }
    }
    keyed.sort_by(|a, b| {
        let (pa, ka, ta, sa) = a.0;
        let (pb, kb, tb, sb) = b.0;
        pa.total_cmp(&pb).then(ka.cmp(&kb)).then(ta.cmp(&tb)).then(sa.cmp(&sb))
    });
    let rows = keyed.into_iter().map(|(_, r)| r).collect();

    let mut aggregate = Vec::new();
    let mut aggregate_failures = 0usize;
    for (seed, p, report) in &theorems {
        if !report.holds() {
            aggregate_failures += 1;
            failures.push(format!(
                "seed={seed} p={p}: aggregate check failed (identity={}, budget={}, query_bound={:?})",
                report.identity_holds, report.budget_holds, report.query_bound_holds
            ));
        }
        aggregate.push(json!({
            "seed": seed,
            "p": p,
            "null_weight_total": report.null_weight_total,
            "sum_h": report.sum_h,
            "budget": report.budget,
            "all_correct": report.all_correct,
            "holds": report.holds(),
        }));
    }

    let summary = json!({
        "instances": instances.len(),
        "seeds": seeds.len(),
        "violations": failures.len(),
        "min_margin": finite_or_null(min_margin),
        "min_residue_eigenvalue": finite_or_null(min_residue),
        "aggregate_checks": theorems.len(),
        "aggregate_failures": aggregate_failures,
        "aggregate": aggregate,
        "failures": failures.iter().take(20).collect::<Vec<_>>(),
        "passed": failures.is_empty(),
    });
    Ok(Outcome {
        report: Report {
            columns: vec![
                "seed",
                "k",
                "p",
                "t",
                "H",
                "increment",
                "bound",
                "margin",
                "residue_min_eig",
                "psi_norm",
                "config_hash",
            ],
            rows,
            summary,
        },
        failures,
    })
}

fn grover_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let hash = config.hash();
    let exact = config.n <= config.max_dim;
    let mut rows = Vec::new();
    for (p_idx, &p) in config.p.iter().enumerate() {
        for t in 0..=config.t_max {
            let alg = build_grover(config.n, t)?;
            let spec = FaultyOracleSpec::with_limits(alg.dims(), 1, p)?;
            let (trials, mean, stderr) = if exact {
                let sim = evolve_exact_capped(&alg, &spec, config.max_dim)?;
                (0, sim.final_state().query_weight(1), 0.0)
            } else {
                let stream = RandomStream::new(config.seed, ((p_idx as u64) << 32) | t as u64);
                let est = grover_success_probability(&alg, &spec, config.trials, &stream)?;
                (est.trials, est.mean, est.stderr)
            };
            rows.push(vec![
                Cell::Int(config.n as u64),
                Cell::Float(p),
                Cell::Int(t as u64),
                Cell::Int(trials as u64),
                Cell::Float(mean),
                Cell::Float(stderr),
                Cell::Int(config.seed),
                Cell::Text(hash.clone()),
            ]);
        }
    }
    let summary = json!({
        "mode": if exact { "exact" } else { "trajectories" },
        "rows": rows.len(),
    });
    Ok(Outcome {
        report: Report {
            columns: vec!["n", "p", "T", "trials", "success_mean", "success_stderr", "seed", "config_hash"],
            rows,
            summary,
        },
        failures: Vec::new(),
    })
}

fn walk(config: &ExperimentConfig) -> Result<Outcome> {
    let hash = config.hash();
    let threshold = config.threshold.unwrap_or(0.5);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (p_idx, &p) in config.p.iter().enumerate() {
        let stream = RandomStream::new(config.seed, p_idx as u64);
        let times = walk_hitting_time(config.n, p, threshold, config.t_max, config.trials, &stream)?;
        let row = |trial: String, value: f64| {
            vec![
                Cell::Int(config.n as u64),
                Cell::Float(p),
                Cell::Text(trial),
                Cell::Float(value),
                Cell::Int(config.seed),
                Cell::Text(hash.clone()),
            ]
        };
        for (i, &t) in times.iter().enumerate() {
            rows.push(row(i.to_string(), t as f64));
        }
        let med = median(&times);
        rows.push(row("median".into(), med));
        let capped = times.iter().filter(|&&t| t >= config.t_max).count();
        medians.push(json!({ "p": p, "median": med, "reached_cap": capped }));
    }
    let summary = json!({ "threshold": threshold, "medians": medians });
    Ok(Outcome {
        report: Report { columns: vec!["n", "p", "trial", "hitting_T", "seed", "config_hash"], rows, summary },
        failures: Vec::new(),
    })
}

fn bound_report(config: &ExperimentConfig) -> Result<Outcome> {
    let alg = build_algorithm(config, config.seed)?;
    let mut rows = Vec::new();
    let mut per_p = Vec::new();
    let mut failures = Vec::new();
    for &p in &config.p {
        let report = aggregate_theorem_check(&alg, p)?;
        for s in &report.per_k {
            let status = match s.final_bound.status {
                FinalBoundStatus::NotApplicable => "not_applicable",
                FinalBoundStatus::Holds => "holds",
                FinalBoundStatus::Violated => "violated",
            };
            rows.push(vec![
                Cell::Float(p),
                Cell::Int(s.k as u64),
                Cell::Int(report.t_count as u64),
                Cell::Float(s.h_final),
                Cell::Float(s.distinguishability),
                Cell::Float(s.final_bound.chain_lower),
                Cell::Text(status.into()),
            ]);
        }
        if !report.holds() {
            failures.push(format!(
                "p={p}: identity={} budget={} query_bound={:?}",
                report.identity_holds, report.budget_holds, report.query_bound_holds
            ));
        }
        per_p.push(json!({
            "p": p,
            "T": report.t_count,
            "null_weight_total": report.null_weight_total,
            "sum_h": report.sum_h,
            "budget": report.budget,
            "threshold": theorem_threshold(config.n, p),
            "all_correct": report.all_correct,
            "identity_holds": report.identity_holds,
            "budget_holds": report.budget_holds,
            "query_bound_holds": report.query_bound_holds,
            "holds": report.holds(),
        }));
    }
    let summary = json!({
        "algorithm": alg.label(),
        "n": config.n,
        "per_p": per_p,
        "passed": failures.is_empty(),
    });
    Ok(Outcome {
        report: Report {
            columns: vec!["p", "k", "T", "h_final", "distinguishability", "chain_lower", "final_bound"],
            rows,
            summary,
        },
        failures,
    })
}
