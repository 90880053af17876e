//! Risk bounds for active and passive operator learning, operator-norm
//! estimates and log-log rate fits.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::grid::{dot_weighted, FieldFunction};
use crate::eigen::EigenSystem;
use crate::oracles::Oracle;

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub n: usize,
    /// `sum_{i<=n} lambda_i`
    pub head: f64,
    /// `sum_{i>n} lambda_i`
    pub tail: f64,
    pub epsilon: f64,
    pub opnorm: f64,
    /// `epsilon^2 head`
    pub irreducible: f64,
    /// `opnorm^2 tail`
    pub reducible: f64,
    pub total: f64,
}

/// `epsilon^2 sum_{i<=n} lambda_i + ||F||^2 sum_{i>n} lambda_i`.
///
/// Numerical spectra count as truncated, so `n` past the stored length
/// gives the full stored head and a zero tail.
pub fn upper_bound(sys: &EigenSystem, n: usize, epsilon: f64, opnorm: f64) -> Result<BoundReport> {
    if !(epsilon >= 0.0) || !(opnorm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon and opnorm must be nonnegative, got {epsilon}, {opnorm}"
        )));
    }
    let head = match sys.head_sum(n) {
        Err(Error::SpectrumExhausted { available, .. }) => sys.head_sum(available)?,
        other => other?,
    };
    let tail = sys.tail_sum(n)?;
    let irreducible = epsilon * epsilon * head;
    let reducible = opnorm * opnorm * tail;
    Ok(BoundReport { n, head, tail, epsilon, opnorm, irreducible, reducible, total: irreducible + reducible })
}

/// `(||F||^2 / 2) sum_{j<=m} lambda_j`.
pub fn lower_bound_value(sys: &EigenSystem, m: usize, opnorm: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    Ok(0.5 * opnorm * opnorm * sys.head_sum(m)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpNormEstimate {
    pub value: f64,
    /// Largest single-probe ratio `||O(phi_j)|| / ||phi_j||`.
    pub probe_max: f64,
    /// Always true: the estimate only sees the probed subspace.
    pub lower_estimate: bool,
}

/// Estimates `||O||` restricted to the span of the first `k` basis functions.
///
/// Starts from the best single probe and refines with 20 power iterations on
/// the Gram matrix of the probed outputs.
pub fn op_norm_estimate(oracle: &dyn Oracle, table: &BasisTable, k: usize) -> Result<OpNormEstimate> {
    if k < 1 || k > table.len() {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {}, got {k}", table.len())));
    }
    let grid = table.grid();
    let w = grid.weights();
    let mut inputs = Vec::with_capacity(k);
    let mut outputs = Vec::with_capacity(k);
    for j in 0..k {
        let phi = table.values(j);
        let out = oracle.apply(&FieldFunction::from_parts(grid.clone(), phi.clone()))?.into_values();
        inputs.push(phi);
        outputs.push(out);
    }
    let mut probe_max = 0.0f64;
    let mut best = 0;
    for j in 0..k {
        let num = dot_weighted(&outputs[j], &outputs[j], w);
        let den = dot_weighted(&inputs[j], &inputs[j], w);
        if den > 0.0 && (num / den).sqrt() > probe_max {
            probe_max = (num / den).sqrt();
            best = j;
        }
    }
    // H_ij = <O phi_i, O phi_j>, the squared operator restricted to the probed span.
    let h = DMatrix::from_fn(k, k, |i, j| dot_weighted(&outputs[i], &outputs[j], w));
    let mut x = nalgebra::DVector::<f64>::zeros(k);
    x[best] = 1.0;
    let mut rayleigh = 0.0;
    for _ in 0..20 {
        let y = &h * &x;
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        x = y / norm;
        rayleigh = x.dot(&(&h * &x));
    }
    Ok(OpNormEstimate { value: probe_max.max(rayleigh.max(0.0).sqrt()), probe_max, lower_estimate: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ln error` against `ln n`. The intercept is in natural log.
pub fn fit_loglog_slope(ns: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if ns.len() != errors.len() {
        return Err(Error::InvalidArgument("ns and errors differ in length".into()));
    }
    if ns.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", ns.len())));
    }
    if let Some(bad) = ns.iter().chain(errors).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("log-log fit needs positive finite values, got {bad}")));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all n values are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    // A constant series is fit perfectly by a flat line.
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r2 })
}
