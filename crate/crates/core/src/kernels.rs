//! Covariance kernels usable with the Nyström solver.

use std::sync::Arc;

pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// `exp(-|x-y|^2 / (2 l^2))`.
pub fn rbf(lengthscale: f64) -> KernelFn {
    let s = 1.0 / (2.0 * lengthscale * lengthscale);
    Arc::new(move |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-s * d2).exp()
    })
}

/// Brownian-motion covariance `min(s, t)`; a product of minima in several dimensions
/// (the Brownian sheet).
pub fn brownian() -> KernelFn {
    Arc::new(|x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a.min(*b)).product())
}

pub fn zero() -> KernelFn {
    Arc::new(|_: &[f64], _: &[f64]| 0.0)
}
