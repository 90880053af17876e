use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::json;

use super::config::{EstimatorKind, Equation, ExperimentConfig, KernelFamily, OracleKind};
use super::{ExperimentOutput, ResultRow};
use crate::basis::BasisTable;
use crate::bounds::{fit_loglog_slope, upper_bound};
use crate::derive_seed;
use crate::eigen::{dirichlet_box_eigensystem, torus_eigensystem, EigenSystem};
use crate::error::{Error, Result};
use crate::estimators::{fit_active_with, fit_passive_lsq, mean_stderr, score, RiskMetric};
use crate::grid::{Domain, FieldFunction, Grid, Measure};
use crate::oracles::{CountingOracle, HeatFd, HeatSpectral, NoisyOracle, Oracle, PoissonFd, PoissonSpectral};
use crate::random_fields::{CoefficientLaw, KlSampler};

const TEST_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

fn base_oracle(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> Result<Arc<dyn Oracle>> {
    Ok(match (cfg.equation, cfg.oracle) {
        (Equation::Poisson, OracleKind::Spectral) => Arc::new(PoissonSpectral::full(grid.clone())?),
        (Equation::Poisson, OracleKind::Fd) => Arc::new(PoissonFd::new(grid.clone())?),
        (Equation::Heat, OracleKind::Spectral) => Arc::new(HeatSpectral::full(grid.clone(), cfg.tau)?),
        (Equation::Heat, OracleKind::Fd) => Arc::new(HeatFd::new(grid.clone(), cfg.tau, cfg.steps)?),
    })
}

/// Continuum operator norm of the solution map, used in the upper bound.
fn analytic_op_norm(cfg: &ExperimentConfig) -> f64 {
    match cfg.equation {
        Equation::Poisson => 1.0 / (2.0 * PI * PI),
        Equation::Heat => (-2.0 * cfg.tau * PI * PI).exp(),
    }
}

fn bound_system(cfg: &ExperimentConfig, count: usize) -> Result<EigenSystem> {
    let k = cfg.kernel();
    match k.family {
        KernelFamily::DirichletBox => dirichlet_box_eigensystem(k.alpha, k.beta, k.gamma, k.dim, count),
        KernelFamily::Torus => torus_eigensystem(k.alpha, k.beta, k.gamma, k.dim, count),
    }
}

fn bound_rows(cfg: &ExperimentConfig, sys: &EigenSystem, opnorm: f64) -> Result<Vec<ResultRow>> {
    let k = cfg.kernel();
    let mut rows = Vec::new();
    for &n in &cfg.budgets {
        let b = upper_bound(sys, n, cfg.epsilon, opnorm)?;
        for (metric, value) in [("upper_bound", b.total), ("reducible", b.reducible), ("irreducible", b.irreducible)] {
            rows.push(ResultRow {
                experiment: cfg.equation.name().into(),
                kernel: k.family.name().into(),
                gamma: Some(k.gamma),
                n: Some(n),
                trial: None,
                estimator: "bound".into(),
                metric: metric.into(),
                value,
                stderr: None,
                seed: None,
            });
        }
    }
    Ok(rows)
}

/// Active and/or passive fits for every budget and trial, scored on a test
/// set shared by all estimators within a trial.
pub fn run_convergence_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let k = cfg.kernel();
    let grid = Grid::new(2, cfg.grid_size, Domain::Box01, Measure::Lebesgue)?;
    let m = cfg.truncation();
    let sys = dirichlet_box_eigensystem(k.alpha, k.beta, k.gamma, 2, m)?;
    let table = Arc::new(BasisTable::new(&sys, &grid, m).map_err(|e| Error::Config(e.to_string()))?);
    let base = base_oracle(cfg, &grid)?;
    let opnorm = analytic_op_norm(cfg);

    let mut rows = bound_rows(cfg, &sys, opnorm)?;
    let mut accounting = Vec::new();
    let mut trial_seeds = Vec::new();
    let mut queried_descriptor = base.descriptor();

    for trial in 0..cfg.trials {
        let tseed = derive_seed(cfg.seed, &[trial as u64]);
        trial_seeds.push(tseed);
        let tests = {
            let sampler = KlSampler::with_table(
                &sys,
                table.clone(),
                CoefficientLaw::StandardGaussian,
                derive_seed(tseed, &[TEST_STREAM]),
            )?;
            (0..cfg.n_test)
                .map(|i| {
                    let v = sampler.sample(i as u64).field;
                    let u = base.apply(&v)?;
                    Ok((v, u))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let queried: Arc<dyn Oracle> = if cfg.epsilon > 0.0 {
            Arc::new(NoisyOracle::new(
                base.clone(),
                &grid,
                cfg.epsilon,
                cfg.noise,
                derive_seed(tseed, &[NOISE_STREAM]),
            )?)
        } else {
            base.clone()
        };
        queried_descriptor = queried.descriptor();
        let counter = CountingOracle::new(queried);

        for &n in &cfg.budgets {
            for &est in &cfg.estimators {
                counter.reset();
                let op = match est {
                    EstimatorKind::Active => fit_active_with(&table, &counter, n)?,
                    EstimatorKind::PassiveLsq => {
                        let sampler = KlSampler::with_table(
                            &sys,
                            table.clone(),
                            CoefficientLaw::StandardGaussian,
                            derive_seed(tseed, &[TRAIN_STREAM, n as u64]),
                        )?;
                        let pairs = (0..n)
                            .map(|i| {
                                let v: FieldFunction = sampler.sample(i as u64).field;
                                let w = counter.apply(&v)?;
                                Ok((v, w))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        fit_passive_lsq(&pairs, cfg.trunc_tol)?
                    }
                };
                let calls = counter.reset();
                accounting.push(json!({ "trial": trial, "n": n, "estimator": est.name(), "calls": calls }));
                if calls != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} estimator used {calls} oracle calls for budget {n}",
                        est.name()
                    )));
                }
                for metric in [RiskMetric::RelativeMse, RiskMetric::AbsoluteRisk] {
                    let report = score(&op, &tests, metric)?;
                    rows.push(ResultRow {
                        experiment: cfg.equation.name().into(),
                        kernel: k.family.name().into(),
                        gamma: Some(k.gamma),
                        n: Some(n),
                        trial: Some(trial),
                        estimator: est.name().into(),
                        metric: metric.name().into(),
                        value: report.mean,
                        stderr: Some(report.stderr),
                        seed: Some(tseed),
                    });
                }
            }
        }
    }

    let manifest = json!({
        "kind": "convergence",
        "config": cfg,
        "kernel": k,
        "truncation": m,
        "eigensystem": sys.params_json(),
        "grid": { "dim": 2, "points_per_dim": cfg.grid_size, "domain": "box01", "layout": "lattice" },
        "truth_oracle": base.descriptor(),
        "queried_oracle": queried_descriptor,
        "op_norm": { "value": opnorm, "source": "analytic continuum norm" },
        "bound_epsilon_note": "the upper bound uses the configured noise epsilon; finite-difference discretization error is not included",
        "test_inputs": "truncated Karhunen-Loeve expansions with standard Gaussian coefficients",
        "trial_seeds": trial_seeds,
        "oracle_calls": accounting,
        "oracle_calls_match_budget": true,
        "trunc_tol": cfg.trunc_tol,
    });
    Ok(ExperimentOutput { rows, manifest })
}

fn slope_row(cfg: &ExperimentConfig, gamma: f64, estimator: &str, metric: &str, ns: &[f64], ys: &[f64]) -> Vec<ResultRow> {
    let Ok(fit) = fit_loglog_slope(ns, ys) else {
        return Vec::new();
    };
    let k = cfg.kernel();
    [("slope_", fit.slope), ("r2_", fit.r2)]
        .into_iter()
        .map(|(prefix, value)| ResultRow {
            experiment: cfg.equation.name().into(),
            kernel: k.family.name().into(),
            gamma: Some(gamma),
            n: None,
            trial: None,
            estimator: estimator.into(),
            metric: format!("{prefix}{metric}"),
            value,
            stderr: None,
            seed: None,
        })
        .collect()
}

/// Per-gamma convergence runs (or bounds alone) with fitted log-log slopes.
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut per_gamma = Vec::new();
    for gamma in cfg.gamma_list() {
        let sub = cfg.with_gamma(gamma);
        let ns: Vec<f64> = sub.budgets.iter().map(|&n| n as f64).collect();
        if sub.bound_only {
            let sys = bound_system(&sub, sub.max_budget())?;
            let opnorm = analytic_op_norm(&sub);
            let brows = bound_rows(&sub, &sys, opnorm)?;
            let totals: Vec<f64> =
                brows.iter().filter(|r| r.metric == "upper_bound").map(|r| r.value).collect();
            rows.extend(brows);
            rows.extend(slope_row(&sub, gamma, "bound", "upper_bound", &ns, &totals));
            per_gamma.push(json!({ "gamma": gamma, "eigensystem": sys.params_json(), "op_norm": opnorm }));
            continue;
        }
        let out = run_convergence_experiment(&sub)?;
        // Mean over trials for every (estimator, metric, n).
        let mut groups: BTreeMap<(String, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        for r in out.rows.iter().filter(|r| r.trial.is_some()) {
            groups
                .entry((r.estimator.clone(), r.metric.clone()))
                .or_default()
                .entry(r.n.unwrap_or(0))
                .or_default()
                .push(r.value);
        }
        let bound_totals: Vec<f64> =
            out.rows.iter().filter(|r| r.metric == "upper_bound").map(|r| r.value).collect();
        rows.extend(out.rows);
        rows.extend(slope_row(&sub, gamma, "bound", "upper_bound", &ns, &bound_totals));
        for ((est, metric), by_n) in groups {
            let means: Vec<f64> = sub.budgets.iter().map(|n| mean_stderr(&by_n[n]).0).collect();
            rows.extend(slope_row(&sub, gamma, &est, &metric, &ns, &means));
        }
        per_gamma.push(out.manifest);
    }
    let manifest = json!({ "kind": "gamma_sweep", "config": cfg, "runs": per_gamma });
    Ok(ExperimentOutput { rows, manifest })
}
