//! Black-box operators: PDE solution maps and test doubles.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Domain, FieldFunction, Grid, Layout};
use crate::random_fields::coefficient_rng;

/// Serializable description of an oracle, embedded in experiment manifests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleDescriptor {
    pub equation: String,
    pub discretization: String,
    pub points_per_dim: usize,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
}

pub trait Oracle: Send + Sync {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction>;

    /// Uniform accuracy bound; 0 for a perfect oracle.
    fn epsilon(&self) -> f64 {
        0.0
    }

    fn descriptor(&self) -> OracleDescriptor;
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        (**self).apply(v)
    }
    fn epsilon(&self) -> f64 {
        (**self).epsilon()
    }
    fn descriptor(&self) -> OracleDescriptor {
        (**self).descriptor()
    }
}

fn check_dirichlet_grid(grid: &Grid) -> Result<()> {
    if grid.dim() != 2 || grid.domain() != Domain::Box01 || grid.layout() != Layout::Lattice {
        return Err(Error::IncompatibleGrid(format!(
            "PDE oracles need a 2d Box01 lattice grid, got {}d {:?} {:?}",
            grid.dim(),
            grid.domain(),
            grid.layout()
        )));
    }
    if grid.points_per_dim() < 3 {
        return Err(Error::IncompatibleGrid("need at least one interior node per axis".into()));
    }
    Ok(())
}

fn check_input(grid: &Arc<Grid>, v: &FieldFunction) -> Result<()> {
    grid.ensure_same(v.grid())
}

/// Applies the negative 5-point Laplacian times `h^2` on interior nodes of an
/// `n x n` lattice, treating boundary values as zero.
fn stencil(n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                y[k] = 0.0;
                continue;
            }
            y[k] = 4.0 * x[k] - x[k - n] - x[k + n] - x[k - 1] - x[k + 1];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn zero_boundary(grid: &Grid, values: &mut [f64]) {
    for (i, v) in values.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *v = 0.0;
        }
    }
}

/// `-Laplacian u = f` with zero Dirichlet data, 5-point finite differences,
/// conjugate gradients.
#[derive(Debug, Clone)]
pub struct PoissonFd {
    grid: Arc<Grid>,
    rel_tol: f64,
    max_iter: usize,
}

impl PoissonFd {
    pub const DEFAULT_REL_TOL: f64 = 1e-10;

    pub fn new(grid: Arc<Grid>) -> Result<Self> {
        check_dirichlet_grid(&grid)?;
        let n = grid.points_per_dim();
        Ok(PoissonFd { grid, rel_tol: Self::DEFAULT_REL_TOL, max_iter: 10 * n * n })
    }

    pub fn with_tolerance(mut self, rel_tol: f64, max_iter: usize) -> Self {
        self.rel_tol = rel_tol;
        self.max_iter = max_iter;
        self
    }
}

impl Oracle for PoissonFd {
    fn apply(&self, f: &FieldFunction) -> Result<FieldFunction> {
        check_input(&self.grid, f)?;
        let n = self.grid.points_per_dim();
        let h2 = self.grid.spacing().powi(2);
        let mut b: Vec<f64> = f.values().iter().map(|v| h2 * v).collect();
        zero_boundary(&self.grid, &mut b);
        let bnorm = dot(&b, &b).sqrt();
        let mut x = vec![0.0; b.len()];
        if bnorm == 0.0 {
            return Ok(FieldFunction::from_parts(self.grid.clone(), x));
        }
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; b.len()];
        let mut rr = dot(&r, &r);
        let target = self.rel_tol * bnorm;
        let mut iter = 0;
        while rr.sqrt() > target {
            if iter == self.max_iter {
                return Err(Error::NonConvergence { iterations: iter, residual: rr.sqrt() / bnorm });
            }
            stencil(n, &p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for k in 0..p.len() {
                p[k] = r[k] + beta * p[k];
            }
            rr = rr_new;
            iter += 1;
        }
        Ok(FieldFunction::from_parts(self.grid.clone(), x))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor {
            equation: "poisson".into(),
            discretization: "fd5_cg".into(),
            points_per_dim: self.grid.points_per_dim(),
            rel_tol: Some(self.rel_tol),
            max_iter: Some(self.max_iter),
            ..Default::default()
        }
    }
}

/// Forward-Euler heat flow `u_t = tau Laplacian u` on `[0, 1]` in time.
#[derive(Debug, Clone)]
pub struct HeatFd {
    grid: Arc<Grid>,
    tau: f64,
    steps: usize,
}

impl HeatFd {
    /// Refuses step sizes with `tau dt / h^2 > 1/4`.
    pub fn new(grid: Arc<Grid>, tau: f64, steps: usize) -> Result<Self> {
        check_dirichlet_grid(&grid)?;
        if !(tau >= 0.0) || steps == 0 {
            return Err(Error::InvalidArgument(format!("need tau >= 0 and steps >= 1, got {tau}, {steps}")));
        }
        let ratio = tau / steps as f64 / grid.spacing().powi(2);
        if ratio > 0.25 {
            return Err(Error::Unstable { ratio });
        }
        Ok(HeatFd { grid, tau, steps })
    }

    pub fn stability_ratio(&self) -> f64 {
        self.tau / self.steps as f64 / self.grid.spacing().powi(2)
    }
}

impl Oracle for HeatFd {
    fn apply(&self, u0: &FieldFunction) -> Result<FieldFunction> {
        check_input(&self.grid, u0)?;
        let n = self.grid.points_per_dim();
        let r = self.stability_ratio();
        let mut u = u0.values().to_vec();
        zero_boundary(&self.grid, &mut u);
        let mut lap = vec![0.0; u.len()];
        for _ in 0..self.steps {
            stencil(n, &u, &mut lap);
            for (ui, li) in u.iter_mut().zip(&lap) {
                *ui -= r * li;
            }
        }
        Ok(FieldFunction::from_parts(self.grid.clone(), u))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor {
            equation: "heat".into(),
            discretization: "fd5_forward_euler".into(),
            points_per_dim: self.grid.points_per_dim(),
            tau: Some(self.tau),
            steps: Some(self.steps),
            ..Default::default()
        }
    }
}

/// Discrete sine transform on a 2d Box01 lattice via the orthonormal table
/// `sqrt(2) sin(k pi x_i)`, `k = 1..=cap`.
#[derive(Debug, Clone)]
struct SineModes {
    table: DMatrix<f64>,
    weighted: DMatrix<f64>,
}

impl SineModes {
    fn new(grid: &Grid, cap: usize) -> Result<Self> {
        check_dirichlet_grid(grid)?;
        let n = grid.points_per_dim();
        if cap < 1 || cap > n - 2 {
            return Err(Error::InvalidArgument(format!(
                "mode cap {cap} outside 1..={} for a {n}-point grid",
                n - 2
            )));
        }
        let axis = grid.axis();
        let w = grid.axis_weights();
        let table =
            DMatrix::from_fn(cap, n, |k, i| std::f64::consts::SQRT_2 * ((k + 1) as f64 * PI * axis[i]).sin());
        let weighted = DMatrix::from_fn(cap, n, |k, i| table[(k, i)] * w[i]);
        Ok(SineModes { table, weighted })
    }

    /// Applies `g(k, l)` to the sine coefficients of `values`.
    fn filter(&self, values: &[f64], g: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let n = self.table.ncols();
        let v = DMatrix::from_row_slice(n, n, values);
        let mut c = &self.weighted * v * self.weighted.transpose();
        let cap = c.nrows();
        for k in 0..cap {
            for l in 0..cap {
                c[(k, l)] *= g(k + 1, l + 1);
            }
        }
        let out = self.table.transpose() * c * &self.table;
        let mut flat = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                flat.push(out[(i, j)]);
            }
        }
        flat
    }
}

/// Exact inverse Dirichlet Laplacian on sine modes up to `mode_cap`.
#[derive(Debug, Clone)]
pub struct PoissonSpectral {
    grid: Arc<Grid>,
    modes: SineModes,
    mode_cap: usize,
}

impl PoissonSpectral {
    pub fn new(grid: Arc<Grid>, mode_cap: usize) -> Result<Self> {
        let modes = SineModes::new(&grid, mode_cap)?;
        Ok(PoissonSpectral { grid, modes, mode_cap })
    }

    /// Full resolution, `mode_cap = N - 2`.
    pub fn full(grid: Arc<Grid>) -> Result<Self> {
        let cap = grid.points_per_dim().saturating_sub(2);
        Self::new(grid, cap)
    }

    /// `1 / (2 pi^2)`, the norm of the continuum inverse Laplacian.
    pub fn op_norm() -> f64 {
        1.0 / (2.0 * PI * PI)
    }
}

impl Oracle for PoissonSpectral {
    fn apply(&self, f: &FieldFunction) -> Result<FieldFunction> {
        check_input(&self.grid, f)?;
        let out = self.modes.filter(f.values(), |k, l| 1.0 / (PI * PI * (k * k + l * l) as f64));
        Ok(FieldFunction::from_parts(self.grid.clone(), out))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor {
            equation: "poisson".into(),
            discretization: "spectral_sine".into(),
            points_per_dim: self.grid.points_per_dim(),
            mode_cap: Some(self.mode_cap),
            ..Default::default()
        }
    }
}

/// Exact heat semigroup `exp(tau Laplacian)` at unit time on sine modes.
#[derive(Debug, Clone)]
pub struct HeatSpectral {
    grid: Arc<Grid>,
    modes: SineModes,
    tau: f64,
    mode_cap: usize,
}

impl HeatSpectral {
    pub fn new(grid: Arc<Grid>, tau: f64, mode_cap: usize) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
        }
        let modes = SineModes::new(&grid, mode_cap)?;
        Ok(HeatSpectral { grid, modes, tau, mode_cap })
    }

    pub fn full(grid: Arc<Grid>, tau: f64) -> Result<Self> {
        let cap = grid.points_per_dim().saturating_sub(2);
        Self::new(grid, tau, cap)
    }

    /// `exp(-2 tau pi^2)`, the decay of the slowest mode.
    pub fn op_norm(tau: f64) -> f64 {
        (-2.0 * tau * PI * PI).exp()
    }
}

impl Oracle for HeatSpectral {
    fn apply(&self, u0: &FieldFunction) -> Result<FieldFunction> {
        check_input(&self.grid, u0)?;
        let tau = self.tau;
        let out = self.modes.filter(u0.values(), |k, l| (-tau * PI * PI * (k * k + l * l) as f64).exp());
        Ok(FieldFunction::from_parts(self.grid.clone(), out))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor {
            equation: "heat".into(),
            discretization: "spectral_sine".into(),
            points_per_dim: self.grid.points_per_dim(),
            tau: Some(self.tau),
            mode_cap: Some(self.mode_cap),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// The same unit field is added to every output.
    FixedDirection,
    /// A fresh unit field per call, addressed by `(seed, call index)`.
    RandomUnit,
}

/// Wraps a base oracle and adds a perturbation of L2 norm exactly `epsilon`.
pub struct NoisyOracle<O> {
    base: O,
    epsilon: f64,
    mode: NoiseMode,
    seed: u64,
    direction: Option<Vec<f64>>,
    calls: AtomicU64,
}

impl<O: Oracle> NoisyOracle<O> {
    pub fn new(base: O, grid: &Arc<Grid>, epsilon: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let direction = match mode {
            NoiseMode::FixedDirection => Some(unit_field(grid, seed, u64::MAX)),
            NoiseMode::RandomUnit => None,
        };
        Ok(NoisyOracle { base, epsilon, mode, seed, direction, calls: AtomicU64::new(0) })
    }

    pub fn base(&self) -> &O {
        &self.base
    }

    /// Applies with the perturbation of call `index`; `apply` uses an internal counter.
    pub fn apply_call(&self, v: &FieldFunction, index: u64) -> Result<FieldFunction> {
        let mut out = self.base.apply(v)?;
        if self.epsilon == 0.0 {
            return Ok(out);
        }
        let noise = match &self.direction {
            Some(d) => FieldFunction::from_parts(v.grid().clone(), d.clone()),
            None => FieldFunction::from_parts(v.grid().clone(), unit_field(v.grid(), self.seed, index)),
        };
        out.axpy(self.epsilon, &noise)?;
        Ok(out)
    }
}

/// Unit-norm white-noise field, zero on Dirichlet boundary nodes.
fn unit_field(grid: &Arc<Grid>, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = coefficient_rng(seed ^ 0x6e6f_6973_65f0_0d1e, index);
    let mut values: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    zero_boundary(grid, &mut values);
    let f = FieldFunction::from_parts(grid.clone(), values);
    let norm = l2_norm(&f);
    f.scaled(1.0 / norm).into_values()
}

impl<O: Oracle> Oracle for NoisyOracle<O> {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        let index = self.calls.fetch_add(1, Ordering::Relaxed);
        self.apply_call(v, index)
    }

    fn epsilon(&self) -> f64 {
        self.epsilon + self.base.epsilon()
    }

    fn descriptor(&self) -> OracleDescriptor {
        let mut d = self.base.descriptor();
        d.epsilon = self.epsilon();
        d.noise = Some(match self.mode {
            NoiseMode::FixedDirection => "fixed_direction".into(),
            NoiseMode::RandomUnit => "random_unit".into(),
        });
        d
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityOracle;

impl Oracle for IdentityOracle {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        Ok(v.clone())
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor { equation: "identity".into(), discretization: "exact".into(), ..Default::default() }
    }
}

/// `v -> sum_j d_j <v, phi_j> phi_j` over a tabulated basis.
#[derive(Debug, Clone)]
pub struct DiagonalOracle {
    table: Arc<BasisTable>,
    diag: Vec<f64>,
    name: String,
}

impl DiagonalOracle {
    pub fn new(table: Arc<BasisTable>, diag: Vec<f64>, name: &str) -> Self {
        assert!(diag.len() <= table.len());
        DiagonalOracle { table, diag, name: name.to_string() }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn table(&self) -> &Arc<BasisTable> {
        &self.table
    }

    /// Action on coefficients in the basis.
    pub fn apply_coefficients(&self, coeffs: &[f64]) -> Vec<f64> {
        coeffs.iter().zip(&self.diag).map(|(c, d)| c * d).collect()
    }
}

impl Oracle for DiagonalOracle {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        self.table.grid().ensure_same(v.grid())?;
        let c = self.table.project(v.values(), self.diag.len());
        let out = self.table.synthesize(&self.apply_coefficients(&c));
        Ok(FieldFunction::from_parts(v.grid().clone(), out))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor {
            equation: self.name.clone(),
            discretization: "diagonal".into(),
            points_per_dim: self.table.grid().points_per_dim(),
            mode_cap: Some(self.diag.len()),
            ..Default::default()
        }
    }
}

/// Counts calls to an inner oracle.
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) -> usize {
        self.calls.swap(0, Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn apply(&self, v: &FieldFunction) -> Result<FieldFunction> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(v)
    }

    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn descriptor(&self) -> OracleDescriptor {
        self.inner.descriptor()
    }
}
