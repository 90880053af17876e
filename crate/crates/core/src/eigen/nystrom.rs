//! Numerical kernel eigenpairs from an i.i.d. sample of the base measure.
//!
//! With `x_1..x_N ~ nu / |nu|` and `K u_j = g_j u_j` for the sampled kernel
//! matrix, the operator eigenvalues are estimated by `|nu| g_j / N` and the
//! eigenfunctions by `sqrt(N/|nu|) u_j` at the sample points, extended to
//! arbitrary points through `phi_j(y) = sqrt(N/|nu|) / g_j * sum_i K(y, x_i) [u_j]_i`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BasisLabel, EigenSystem, SystemKind};
use crate::error::{Error, Result};
use crate::grid::{Domain, Measure};
use crate::kernels::KernelFn;

pub struct NystromSystem {
    dim: usize,
    points: Vec<f64>,
    /// Leading eigenvectors of the kernel matrix, one row per eigenpair.
    vectors: Vec<Vec<f64>>,
    /// Leading kernel-matrix eigenvalues `g_j`.
    matrix_eigenvalues: Vec<f64>,
    mass: f64,
    seed: u64,
    kernel: KernelFn,
}

impl fmt::Debug for NystromSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NystromSystem")
            .field("dim", &self.dim)
            .field("samples", &self.sample_count())
            .field("matrix_eigenvalues", &self.matrix_eigenvalues)
            .field("mass", &self.mass)
            .finish()
    }
}

impl NystromSystem {
    pub fn sample_count(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matrix_eigenvalues(&self) -> &[f64] {
        &self.matrix_eigenvalues
    }

    pub fn matrix_eigenvector(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Out-of-sample eigenfunction value; zero for a vanishing eigenvalue.
    pub(super) fn extend(&self, j: usize, y: &[f64]) -> f64 {
        let g = self.matrix_eigenvalues[j];
        if g <= 0.0 {
            return 0.0;
        }
        let n = self.sample_count() as f64;
        let s: f64 = self.vectors[j]
            .iter()
            .enumerate()
            .map(|(i, u)| (self.kernel)(y, self.point(i)) * u)
            .sum();
        (n / self.mass).sqrt() / g * s
    }

    /// Eigenfunction values at the sample points, `sqrt(N/|nu|) u_j`.
    pub fn sample_values(&self, j: usize) -> Vec<f64> {
        let scale = (self.sample_count() as f64 / self.mass).sqrt();
        self.vectors[j].iter().map(|u| scale * u).collect()
    }
}

/// Draws `n` points i.i.d. from `measure` restricted to `domain`, returning the
/// points and the measure's total mass on the domain.
fn sample_measure(measure: Measure, domain: Domain, dim: usize, n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let (lo, hi) = domain.axis_bounds();
    let mut points = Vec::with_capacity(n * dim);
    match measure {
        Measure::Lebesgue => {
            for _ in 0..n * dim {
                points.push(lo + (hi - lo) * rng.random::<f64>());
            }
            (points, domain.axis_length().powi(dim as i32))
        }
        Measure::Gaussian { variance } => {
            let sd = variance.sqrt();
            while points.len() < n * dim {
                let z: f64 = rng.sample(StandardNormal);
                let x = sd * z;
                if x >= lo && x <= hi {
                    points.push(x);
                }
            }
            (points, gaussian_axis_mass(variance, lo, hi).powi(dim as i32))
        }
    }
}

/// Mass of `N(0, variance)` on `[lo, hi]` by composite Simpson.
fn gaussian_axis_mass(variance: f64, lo: f64, hi: f64) -> f64 {
    let sd = variance.sqrt();
    let a = lo.max(-40.0 * sd);
    let b = hi.min(40.0 * sd);
    if b <= a {
        return 0.0;
    }
    let m = 20_000;
    let h = (b - a) / m as f64;
    let density = Measure::Gaussian { variance };
    let mut s = density.axis_density(a) + density.axis_density(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * density.axis_density(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Top eigenpairs of a symmetric matrix given by its action, via Lanczos with
/// full reorthogonalization. Returns eigenvalues in decreasing order along with
/// the smallest Ritz value seen (a lower estimate of the bottom of the spectrum).
pub(crate) struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub min_ritz: f64,
}

pub(crate) fn lanczos_top(
    n: usize,
    count: usize,
    matvec: impl Fn(&[f64], &mut [f64]),
    seed: u64,
) -> LanczosResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c61_6e63_7a6f_7321);
    let mut steps = n.min((2 * count + 40).max(60));
    loop {
        let (basis, alphas, betas) = lanczos_steps(n, steps, &matvec, &mut rng);
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
        let last_beta = if m < n { betas.get(m - 1).copied().unwrap_or(0.0) } else { 0.0 };
        let converged = order
            .iter()
            .take(count)
            .all(|&i| (last_beta * eig.eigenvectors[(m - 1, i)]).abs() <= 1e-11 * top);
        if converged || m >= n || steps >= n {
            let min_ritz = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let mut values = Vec::with_capacity(count);
            let mut vectors = Vec::with_capacity(count);
            for &i in order.iter().take(count) {
                values.push(eig.eigenvalues[i]);
                let mut v = vec![0.0; n];
                for (k, q) in basis.iter().enumerate() {
                    let s = eig.eigenvectors[(k, i)];
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi += s * qi;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for vi in &mut v {
                    *vi /= norm;
                }
                vectors.push(v);
            }
            return LanczosResult { values, vectors, min_ritz };
        }
        steps = n.min(steps * 2);
    }
}

/// Runs `steps` Lanczos iterations. Breakdowns (invariant subspaces) restart
/// from a fresh random vector orthogonal to the basis so that rank-deficient
/// matrices still yield a full set of Ritz pairs.
fn lanczos_steps(
    n: usize,
    steps: usize,
    matvec: &impl Fn(&[f64], &mut [f64]),
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas = Vec::with_capacity(steps);
    let mut q = random_unit(n, rng, &basis);
    let mut w = vec![0.0; n];
    for j in 0..steps {
        matvec(&q, &mut w);
        let alpha = dot(&q, &w);
        basis.push(q.clone());
        alphas.push(alpha);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let beta = dot(&w, &w).sqrt();
        if j + 1 == steps {
            betas.push(beta);
            break;
        }
        let scale = alphas.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1e-300);
        if beta <= 1e-12 * scale {
            betas.push(0.0);
            q = random_unit(n, rng, &basis);
            if q.iter().all(|&x| x == 0.0) {
                break;
            }
        } else {
            betas.push(beta);
            q = w.iter().map(|x| x / beta).collect();
        }
    }
    (basis, alphas, betas)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[Vec<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    for _ in 0..2 {
        for b in against {
            let c = dot(b, &v);
            axpy(-c, b, &mut v);
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm < 1e-12 {
        return vec![0.0; n];
    }
    v.iter().map(|x| x / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Nyström eigensystem of `kernel` under `measure` on `domain`.
///
/// Fails with [`Error::IndefiniteKernel`] when a Ritz value falls below
/// `-1e-8 * trace(K)`, which signals a kernel that is not positive semidefinite.
#[allow(clippy::too_many_arguments)]
pub fn nystrom_eigensystem(
    kernel: KernelFn,
    measure: Measure,
    domain: Domain,
    dim: usize,
    samples: usize,
    count: usize,
    seed: u64,
) -> Result<EigenSystem> {
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if samples < count {
        return Err(Error::InvalidArgument(format!("need at least {count} samples, got {samples}")));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidArgument(format!("unsupported dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, mass) = sample_measure(measure, domain, dim, samples, &mut rng);

    let n = samples;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let xi = &points[i * dim..(i + 1) * dim];
        for j in 0..=i {
            let v = kernel(xi, &points[j * dim..(j + 1) * dim]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let trace: f64 = (0..n).map(|i| k[i * n + i]).sum();

    let res = lanczos_top(
        n,
        count,
        |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = dot(&k[i * n..(i + 1) * n], x);
            }
        },
        seed,
    );
    if res.min_ritz < -1e-8 * trace.abs() {
        return Err(Error::IndefiniteKernel { min_eigenvalue: res.min_ritz, trace });
    }

    // Clip rounding-level negatives to zero; a zero eigenvalue marks a null direction.
    let floor = 1e-10 * trace.abs().max(f64::MIN_POSITIVE);
    let matrix_eigenvalues: Vec<f64> = res.values.iter().map(|&g| if g <= floor { 0.0 } else { g }).collect();
    let eigenvalues: Vec<f64> = matrix_eigenvalues.iter().map(|g| mass * g / n as f64).collect();
    let labels = (0..count).map(|j| BasisLabel { factors: vec![j] }).collect();
    let sys = NystromSystem {
        dim,
        points,
        vectors: res.vectors,
        matrix_eigenvalues,
        mass,
        seed,
        kernel,
    };
    Ok(EigenSystem::from_parts(
        SystemKind::Nystrom(std::sync::Arc::new(sys)),
        dim,
        domain,
        eigenvalues,
        labels,
        None,
    ))
}
