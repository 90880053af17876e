//! Rank-one-sum operator estimators and their risk.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::grid::{dot_weighted, l2_norm_sq, FieldFunction, Grid};
use crate::oracles::Oracle;
use crate::random_fields::{CoefficientLaw, KlSampler};

/// `v -> sum_i <right_i, v> left_i`.
#[derive(Debug, Clone)]
pub struct RankOneOperator {
    grid: Arc<Grid>,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    right_orthonormal: bool,
}

impl RankOneOperator {
    pub fn new(grid: Arc<Grid>, left: Vec<FieldFunction>, right: Vec<FieldFunction>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::InvalidArgument(format!(
                "{} left factors but {} right factors",
                left.len(),
                right.len()
            )));
        }
        for f in left.iter().chain(&right) {
            grid.ensure_same(f.grid())?;
        }
        Ok(RankOneOperator {
            grid,
            left: left.into_iter().map(FieldFunction::into_values).collect(),
            right: right.into_iter().map(FieldFunction::into_values).collect(),
            right_orthonormal: false,
        })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        RankOneOperator { grid, left: Vec::new(), right: Vec::new(), right_orthonormal: true }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.left.len()
    }

    pub fn is_right_orthonormal(&self) -> bool {
        self.right_orthonormal
    }

    pub fn left(&self, i: usize) -> FieldFunction {
        FieldFunction::from_parts(self.grid.clone(), self.left[i].clone())
    }

    pub fn right(&self, i: usize) -> FieldFunction {
        FieldFunction::from_parts(self.grid.clone(), self.right[i].clone())
    }

    pub fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        self.grid.ensure_same(v.grid())?;
        let w = self.grid.weights();
        let mut out = vec![0.0; self.grid.len()];
        for (l, r) in self.left.iter().zip(&self.right) {
            let c = dot_weighted(r, v.values(), w);
            if c != 0.0 {
                for (o, li) in out.iter_mut().zip(l) {
                    *o += c * li;
                }
            }
        }
        Ok(FieldFunction::from_parts(self.grid.clone(), out))
    }
}

/// Queries the oracle on the first `n` eigenfunctions: `sum_i O(phi_i) (x) phi_i`.
pub fn fit_active(sys: &EigenSystem, oracle: &dyn Oracle, n: usize, grid: &Arc<Grid>) -> Result<RankOneOperator> {
    let table = BasisTable::new(sys, grid, n)?;
    fit_active_with(&table, oracle, n)
}

/// As [`fit_active`] with a precomputed table holding at least `n` functions.
pub fn fit_active_with(table: &BasisTable, oracle: &dyn Oracle, n: usize) -> Result<RankOneOperator> {
    if n > table.len() {
        return Err(Error::SpectrumExhausted { requested: n, available: table.len() });
    }
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for j in 0..n {
        let phi = table.values(j);
        let w = oracle.apply(&FieldFunction::from_parts(table.grid().clone(), phi.clone()))?;
        table.grid().ensure_same(w.grid())?;
        left.push(w.into_values());
        right.push(phi);
    }
    Ok(RankOneOperator { grid: table.grid().clone(), left, right, right_orthonormal: true })
}

pub const DEFAULT_TRUNC_TOL: f64 = 1e-10;

/// Least squares `L = (sum w_i (x) v_i)(sum v_i (x) v_i)^+`.
///
/// The pseudoinverse is taken on the `n x n` Gram matrix `G_ij = <v_i, v_j>`:
/// `L v = sum_i w_i sum_j G+_ij <v_j, v>`. Eigenvalues of `G` below
/// `trunc_tol` times the largest are treated as zero.
pub fn fit_passive_lsq(pairs: &[(FieldFunction, FieldFunction)], trunc_tol: f64) -> Result<RankOneOperator> {
    let Some((v0, _)) = pairs.first() else {
        return Err(Error::EmptyInput("training pairs"));
    };
    let grid = v0.grid().clone();
    for (v, w) in pairs {
        grid.ensure_same(v.grid())?;
        grid.ensure_same(w.grid())?;
    }
    let n = pairs.len();
    let weights = grid.weights();
    let gram = DMatrix::from_fn(n, n, |i, j| dot_weighted(pairs[i].0.values(), pairs[j].0.values(), weights));
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return Err(Error::DegenerateInputs);
    }
    let cutoff = trunc_tol * top;
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    for (k, &s) in eig.eigenvalues.iter().enumerate() {
        if s > cutoff {
            let q = eig.eigenvectors.column(k);
            pinv += (q * q.transpose()) / s;
        }
    }
    let len = grid.len();
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = vec![0.0; len];
        for j in 0..n {
            let g = pinv[(i, j)];
            if g != 0.0 {
                for (ri, vj) in r.iter_mut().zip(pairs[j].0.values()) {
                    *ri += g * vj;
                }
            }
        }
        right.push(r);
    }
    let left = pairs.iter().map(|(_, w)| w.values().to_vec()).collect();
    Ok(RankOneOperator { grid, left, right, right_orthonormal: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMetric {
    /// `||u - u_hat||^2 / ||u||^2`, averaged.
    RelativeMse,
    /// `||u - u_hat||^2`, averaged.
    AbsoluteRisk,
}

impl RiskMetric {
    pub fn name(&self) -> &'static str {
        match self {
            RiskMetric::RelativeMse => "relative_mse",
            RiskMetric::AbsoluteRisk => "abs_risk",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskReport {
    pub metric: RiskMetric,
    pub values: Vec<f64>,
    /// Test cases dropped because the true output vanished.
    pub skipped: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl RiskReport {
    pub fn from_values(metric: RiskMetric, values: Vec<f64>, skipped: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("test set"));
        }
        let (mean, stderr) = mean_stderr(&values);
        Ok(RiskReport { metric, values, skipped, mean, stderr })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Norms below this are treated as a vanishing true output.
pub const ZERO_OUTPUT_NORM_SQ: f64 = 1e-14;

/// Scores `est` against precomputed `(input, true output)` pairs.
pub fn score(est: &RankOneOperator, tests: &[(FieldFunction, FieldFunction)], metric: RiskMetric) -> Result<RiskReport> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let mut values = Vec::with_capacity(tests.len());
    let mut skipped = 0;
    for (v, u) in tests {
        let err = l2_norm_sq(&est.apply(v)?.sub(u)?);
        match metric {
            RiskMetric::AbsoluteRisk => values.push(err),
            RiskMetric::RelativeMse => {
                let denom = l2_norm_sq(u);
                if denom < ZERO_OUTPUT_NORM_SQ {
                    skipped += 1;
                } else {
                    values.push(err / denom);
                }
            }
        }
    }
    RiskReport::from_values(metric, values, skipped)
}

pub fn relative_mse(est: &RankOneOperator, truth: &dyn Oracle, test_inputs: &[FieldFunction]) -> Result<RiskReport> {
    let tests = test_inputs
        .iter()
        .map(|v| Ok((v.clone(), truth.apply(v)?)))
        .collect::<Result<Vec<_>>>()?;
    score(est, &tests, RiskMetric::RelativeMse)
}

/// Monte Carlo absolute risk over `n_test` fresh KL samples of the first `m` eigenpairs.
#[allow(clippy::too_many_arguments)]
pub fn expected_risk_mc(
    est: &RankOneOperator,
    truth: &dyn Oracle,
    sys: &EigenSystem,
    m: usize,
    law: CoefficientLaw,
    n_test: usize,
    seed: u64,
) -> Result<RiskReport> {
    if n_test == 0 {
        return Err(Error::EmptyInput("test set"));
    }
    let sampler = KlSampler::new(sys, m, est.grid(), law, seed)?;
    let mut values = Vec::with_capacity(n_test);
    for k in 0..n_test {
        let v = sampler.sample(k as u64).field;
        let u = truth.apply(&v)?;
        values.push(l2_norm_sq(&est.apply(&v)?.sub(&u)?));
    }
    RiskReport::from_values(RiskMetric::AbsoluteRisk, values, 0)
}
