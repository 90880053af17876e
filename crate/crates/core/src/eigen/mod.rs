//! Eigenpairs of covariance kernels, ordered by decreasing eigenvalue.
//!
//! Analytic families (periodic torus, Dirichlet box, Brownian motion, RBF
//! under a Gaussian measure) are tensor products of one-dimensional factor
//! functions; each eigenfunction is described by one factor index per axis.
//! Nyström systems are built numerically from sampled kernel matrices.

mod analytic;
mod nystrom;

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

pub use analytic::{
    brownian_eigensystem, dirichlet_box_eigensystem, rbf_eigensystem_1d, rbf_eigensystem_nd, torus_eigensystem,
};
pub use nystrom::{nystrom_eigensystem, NystromSystem};

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::special::scaled_hermite;

/// Constants of the RBF kernel eigen-expansion under a centered Gaussian measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RbfEigParams {
    pub lengthscale: f64,
    pub variance: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RbfEigParams {
    pub fn new(lengthscale: f64, variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidArgument(format!("lengthscale must be positive, got {lengthscale}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("measure variance must be positive, got {variance}")));
        }
        let a = 1.0 / (4.0 * variance);
        let b = 1.0 / (2.0 * lengthscale * lengthscale);
        let c = (a * a + 2.0 * a * b).sqrt();
        Ok(RbfEigParams { lengthscale, variance, a, b, c })
    }

    /// Geometric decay ratio `b / (a + b + c)`.
    pub fn ratio(&self) -> f64 {
        self.b / (self.a + self.b + self.c)
    }

    pub fn leading(&self) -> f64 {
        (2.0 * self.a / (self.a + self.b + self.c)).sqrt()
    }

    pub fn eigenvalue(&self, order: usize) -> f64 {
        self.leading() * self.ratio().powi(order as i32)
    }

    /// Values of the normalized eigenfunctions of orders `0..=max_order` at `x`.
    pub fn eigenfunctions(&self, max_order: usize, x: f64) -> Vec<f64> {
        let envelope = (self.c / self.a).powf(0.25) * (-(self.c - self.a) * x * x).exp();
        let mut h = scaled_hermite(max_order, (2.0 * self.c).sqrt() * x);
        for v in &mut h {
            *v *= envelope;
        }
        h
    }
}

#[derive(Clone, Debug)]
pub enum SystemKind {
    Torus { alpha: f64, beta: f64, gamma: f64 },
    DirichletBox { alpha: f64, beta: f64, gamma: f64 },
    Brownian,
    Rbf(RbfEigParams),
    Nystrom(Arc<NystromSystem>),
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Torus { .. } => "torus",
            SystemKind::DirichletBox { .. } => "dirichlet_box",
            SystemKind::Brownian => "brownian",
            SystemKind::Rbf(_) => "rbf",
            SystemKind::Nystrom(_) => "nystrom",
        }
    }

    fn is_tensor(&self) -> bool {
        !matches!(self, SystemKind::Nystrom(_))
    }

    /// Values of one-dimensional factors `0..=max_index` at `x`.
    pub(crate) fn factor_column(&self, max_index: usize, x: f64) -> Vec<f64> {
        match self {
            SystemKind::Torus { .. } => (0..=max_index)
                .map(|f| {
                    if f == 0 {
                        1.0
                    } else {
                        let k = ((f + 1) / 2) as f64;
                        if f % 2 == 1 {
                            SQRT_2 * (2.0 * PI * k * x).cos()
                        } else {
                            SQRT_2 * (2.0 * PI * k * x).sin()
                        }
                    }
                })
                .collect(),
            SystemKind::DirichletBox { .. } => {
                (0..=max_index).map(|f| SQRT_2 * ((f + 1) as f64 * PI * x).sin()).collect()
            }
            SystemKind::Brownian => (0..=max_index).map(|f| SQRT_2 * ((f as f64 + 0.5) * PI * x).sin()).collect(),
            SystemKind::Rbf(p) => p.eigenfunctions(max_index, x),
            SystemKind::Nystrom(_) => unreachable!("nystrom systems are not tensor products"),
        }
    }

    fn factor(&self, index: usize, x: f64) -> f64 {
        match self {
            SystemKind::Rbf(p) => p.eigenfunctions(index, x)[index],
            _ => self.factor_column(index, x).pop().unwrap_or(0.0),
        }
    }

    /// Highest frequency carried by a factor index, for grid resolution checks.
    fn factor_frequency(&self, index: usize) -> Option<usize> {
        match self {
            SystemKind::Torus { .. } => Some((index + 1) / 2),
            SystemKind::DirichletBox { .. } | SystemKind::Brownian => Some(index + 1),
            _ => None,
        }
    }

    fn describe_factor(&self, index: usize) -> String {
        match self {
            SystemKind::Torus { .. } => match index {
                0 => "1".to_string(),
                f if f % 2 == 1 => format!("cos{}", (f + 1) / 2),
                f => format!("sin{}", f / 2),
            },
            SystemKind::DirichletBox { .. } => format!("sin{}", index + 1),
            SystemKind::Brownian => format!("j{}", index + 1),
            SystemKind::Rbf(_) => format!("H{index}"),
            SystemKind::Nystrom(_) => format!("u{index}"),
        }
    }
}

/// Per-eigenfunction descriptor: one factor index per axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BasisLabel {
    pub factors: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct EigenSystem {
    kind: SystemKind,
    dim: usize,
    domain: Domain,
    eigenvalues: Vec<f64>,
    labels: Vec<BasisLabel>,
    /// Sum of the eigenvalues beyond the stored ones; `None` when unknown.
    remainder: Option<f64>,
}

impl EigenSystem {
    pub(crate) fn from_parts(
        kind: SystemKind,
        dim: usize,
        domain: Domain,
        eigenvalues: Vec<f64>,
        labels: Vec<BasisLabel>,
        remainder: Option<f64>,
    ) -> Self {
        debug_assert_eq!(eigenvalues.len(), labels.len());
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        EigenSystem { kind, dim, domain, eigenvalues, labels, remainder }
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label(&self, j: usize) -> String {
        let parts: Vec<String> = self.labels[j].factors.iter().map(|&f| self.kind.describe_factor(f)).collect();
        parts.join("*")
    }

    /// Eigenfunction `j` (zero-based rank) at point `x`.
    pub fn eval(&self, j: usize, x: &[f64]) -> f64 {
        match &self.kind {
            SystemKind::Nystrom(sys) => sys.extend(j, x),
            kind => self.labels[j]
                .factors
                .iter()
                .zip(x)
                .map(|(&f, &xi)| kind.factor(f, xi))
                .product(),
        }
    }

    pub(crate) fn is_tensor(&self) -> bool {
        self.kind.is_tensor()
    }

    /// Largest factor frequency among the first `m` eigenfunctions, if the
    /// family is trigonometric.
    pub(crate) fn max_frequency(&self, m: usize) -> Option<usize> {
        self.labels[..m]
            .iter()
            .flat_map(|l| l.factors.iter())
            .map(|&f| self.kind.factor_frequency(f))
            .try_fold(0, |acc, f| f.map(|f| acc.max(f)))
    }

    /// Mercer partial sum `sum_{j<m} lambda_j phi_j(x) phi_j(y)`.
    pub fn kernel_partial_sum(&self, x: &[f64], y: &[f64], m: usize) -> Result<f64> {
        if m > self.len() {
            return Err(Error::SpectrumExhausted { requested: m, available: self.len() });
        }
        Ok((0..m).map(|j| self.eigenvalues[j] * self.eval(j, x) * self.eval(j, y)).sum())
    }

    /// `sum_{i<n} lambda_i`, extending analytic spectra past the stored count.
    pub fn head_sum(&self, n: usize) -> Result<f64> {
        if n <= self.len() {
            return Ok(self.eigenvalues[..n].iter().sum());
        }
        match self.extended(n)? {
            Some(ext) => Ok(ext.eigenvalues.iter().sum()),
            None => Err(Error::SpectrumExhausted { requested: n, available: self.len() }),
        }
    }

    /// `sum_{i>=n} lambda_i` (zero-based), i.e. the eigenvalue mass not
    /// captured by the first `n` eigenfunctions. Analytic families include
    /// the closed-form remainder past the stored spectrum; Nyström systems are
    /// truncated at their stored length.
    pub fn tail_sum(&self, n: usize) -> Result<f64> {
        if n <= self.len() {
            let stored: f64 = self.eigenvalues[n..].iter().sum();
            return Ok(stored + self.remainder.unwrap_or(0.0));
        }
        match self.extended(n)? {
            Some(ext) => Ok(ext.remainder.unwrap_or(0.0)),
            None => Ok(0.0),
        }
    }

    /// Remainder beyond the stored spectrum, when the family admits one.
    pub fn remainder(&self) -> Option<f64> {
        self.remainder
    }

    /// Same family rebuilt with `count` stored pairs; `None` for numerical systems.
    fn extended(&self, count: usize) -> Result<Option<EigenSystem>> {
        Ok(Some(match &self.kind {
            SystemKind::Torus { alpha, beta, gamma } => torus_eigensystem(*alpha, *beta, *gamma, self.dim, count)?,
            SystemKind::DirichletBox { alpha, beta, gamma } => {
                dirichlet_box_eigensystem(*alpha, *beta, *gamma, self.dim, count)?
            }
            SystemKind::Brownian => brownian_eigensystem(count)?,
            SystemKind::Rbf(p) => analytic::rbf_with_params(*p, self.dim, count, self.domain)?,
            SystemKind::Nystrom(_) => return Ok(None),
        }))
    }

    /// Defining constants, for manifests.
    pub fn params_json(&self) -> serde_json::Value {
        let mut v = match &self.kind {
            SystemKind::Torus { alpha, beta, gamma } | SystemKind::DirichletBox { alpha, beta, gamma } => {
                serde_json::json!({ "alpha": alpha, "beta": beta, "gamma": gamma })
            }
            SystemKind::Brownian => serde_json::json!({}),
            SystemKind::Rbf(p) => serde_json::to_value(p).unwrap_or_default(),
            SystemKind::Nystrom(n) => serde_json::json!({
                "samples": n.sample_count(),
                "measure_mass": n.mass(),
                "seed": n.seed(),
            }),
        };
        v["family"] = serde_json::Value::from(self.kind.name());
        v["dim"] = serde_json::Value::from(self.dim);
        v["count"] = serde_json::Value::from(self.len());
        v
    }

    /// Writes `rank,eigenvalue,label` rows; ranks start at 1.
    pub fn write_spectrum_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "eigenvalue", "label"])?;
        for j in 0..self.len() {
            w.write_record([(j + 1).to_string(), self.eigenvalues[j].to_string(), self.label(j)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable one-line summary.
    pub fn summary(&self) -> String {
        let mut s = format!("{} system, d={}, {} pairs", self.kind.name(), self.dim, self.len());
        if let Some(first) = self.eigenvalues.first() {
            let _ = write!(s, ", lambda_1={first:.6e}");
        }
        s
    }
}
