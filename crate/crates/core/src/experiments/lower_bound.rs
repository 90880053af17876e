use std::sync::Arc;

use serde_json::json;

use super::config::{HardSystem, LowerBoundConfig};
use super::{ExperimentOutput, ResultRow};
use crate::basis::BasisTable;
use crate::derive_seed;
use crate::eigen::brownian_eigensystem;
use crate::error::{Error, Result};
use crate::estimators::{fit_active_with, fit_passive_lsq, mean_stderr, RankOneOperator};
use crate::grid::{l2_norm_sq, Domain, Grid, Measure};
use crate::oracles::Oracle;
use crate::random_fields::{draw_coefficients, make_hard_instance, KlSampler};

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const SIGN_STREAM: u64 = 3;

/// Coefficients this small count as zero when detecting the event `E_{n,m}`.
const ZERO_COEFF: f64 = 1e-12;

/// Sparse three-point inputs against the sign-flip operator: passive least
/// squares versus eigenfunction queries, with the frequency of the event that
/// no training input touches the first `m` directions.
///
/// This is an illustration with one concrete passive learner; the lower bound
/// itself holds for every passive estimator.
pub fn run_lower_bound_demo(cfg: &LowerBoundConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let HardSystem::Brownian = cfg.system;
    let kernel = "brownian";
    let sys = Arc::new(brownian_eigensystem(cfg.truncation)?);
    let grid = Grid::new(1, cfg.grid_size, Domain::Box01, Measure::Lebesgue)?;
    let table = Arc::new(BasisTable::new(&sys, &grid, cfg.truncation).map_err(|e| Error::Config(e.to_string()))?);
    let p = cfg.sparsity();
    let law = crate::random_fields::CoefficientLaw::ThreePoint { p };
    let train_seed = derive_seed(cfg.seed, &[TRAIN_STREAM]);
    let test_seed = derive_seed(cfg.seed, &[TEST_STREAM]);
    let train = KlSampler::with_table(&sys, table.clone(), law, train_seed)?;
    let test = KlSampler::with_table(&sys, table.clone(), law, test_seed)?;

    let event = |trial: usize| {
        (0..cfg.n).all(|i| {
            draw_coefficients(law, cfg.m, train_seed, (trial * cfg.n + i) as u64)
                .iter()
                .all(|x| x.abs() < ZERO_COEFF)
        })
    };

    let row = |n: Option<usize>, trial: Option<usize>, estimator: &str, metric: &str, value: f64, stderr: Option<f64>| {
        ResultRow {
            experiment: "lower_bound".into(),
            kernel: kernel.into(),
            gamma: None,
            n,
            trial,
            estimator: estimator.into(),
            metric: metric.into(),
            value,
            stderr,
            seed: Some(cfg.seed),
        }
    };

    let mut rows = Vec::new();
    let mut passive_all = Vec::new();
    let mut active_all = Vec::new();
    let mut degenerate = 0usize;
    for trial in 0..cfg.trials {
        let inst = make_hard_instance(sys.clone(), cfg.m, cfg.n, cfg.c, derive_seed(cfg.seed, &[SIGN_STREAM, trial as u64]))?;
        let oracle = inst.oracle_with(table.clone());
        let pairs = (0..cfg.n)
            .map(|i| {
                let v = train.sample((trial * cfg.n + i) as u64).field;
                let w = oracle.apply(&v)?;
                Ok((v, w))
            })
            .collect::<Result<Vec<_>>>()?;
        let passive = match fit_passive_lsq(&pairs, cfg.trunc_tol) {
            Ok(op) => op,
            // Every training input vanished: the pseudoinverse is the zero map.
            Err(Error::DegenerateInputs) => {
                degenerate += 1;
                RankOneOperator::zero(grid.clone())
            }
            Err(e) => return Err(e),
        };
        let active = if cfg.include_active { Some(fit_active_with(&table, &oracle, cfg.n)?) } else { None };

        let mut passive_risk = Vec::with_capacity(cfg.n_test);
        let mut active_risk = Vec::with_capacity(cfg.n_test);
        for j in 0..cfg.n_test {
            let v = test.sample((trial * cfg.n_test + j) as u64).field;
            let u = oracle.apply(&v)?;
            passive_risk.push(l2_norm_sq(&passive.apply(&v)?.sub(&u)?));
            if let Some(a) = &active {
                active_risk.push(l2_norm_sq(&a.apply(&v)?.sub(&u)?));
            }
        }
        let (pm, ps) = mean_stderr(&passive_risk);
        rows.push(row(Some(cfg.n), Some(trial), "passive_lsq", "abs_risk", pm, Some(ps)));
        if !active_risk.is_empty() {
            let (am, as_) = mean_stderr(&active_risk);
            rows.push(row(Some(cfg.n), Some(trial), "active", "abs_risk", am, Some(as_)));
        }
        rows.push(row(Some(cfg.n), Some(trial), "event", "event_indicator", if event(trial) { 1.0 } else { 0.0 }, None));
        passive_all.extend(passive_risk);
        active_all.extend(active_risk);
    }

    let event_trials = cfg.event_trials.max(cfg.trials);
    let hits = (0..event_trials).filter(|&t| event(t)).count();
    let freq = hits as f64 / event_trials as f64;
    let freq_se = (freq * (1.0 - freq) / event_trials as f64).sqrt();
    let prob = (1.0 - p).powf((cfg.n * cfg.m) as f64);
    let lower = 0.5 * cfg.c * cfg.c * sys.head_sum(cfg.m)?;
    let active_bound = cfg.c * cfg.c * sys.tail_sum(cfg.n)?;

    rows.push(row(Some(cfg.n), None, "event", "event_frequency", freq, Some(freq_se)));
    rows.push(row(Some(cfg.n), None, "theory", "event_probability", prob, None));
    let (pm, ps) = mean_stderr(&passive_all);
    rows.push(row(Some(cfg.n), None, "passive_lsq", "abs_risk", pm, Some(ps)));
    if !active_all.is_empty() {
        let (am, as_) = mean_stderr(&active_all);
        rows.push(row(Some(cfg.n), None, "active", "abs_risk", am, Some(as_)));
    }
    rows.push(row(Some(cfg.n), None, "theory", "lower_bound", lower, None));
    rows.push(row(Some(cfg.n), None, "theory", "active_upper_bound", active_bound, None));

    let manifest = json!({
        "kind": "lower_bound",
        "config": cfg,
        "sparsity": p,
        "eigensystem": sys.params_json(),
        "grid": { "dim": 1, "points_per_dim": cfg.grid_size, "domain": "box01", "layout": "lattice" },
        "event_trials": event_trials,
        "event_zero_threshold": ZERO_COEFF,
        "degenerate_training_sets": degenerate,
        "risk_samples": passive_all.len(),
        "note": "illustration with one passive learner (least squares); the lower bound applies to every passive estimator",
    });
    Ok(ExperimentOutput { rows, manifest })
}
