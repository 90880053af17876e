//! Small special-function helpers.

/// Trigamma function `psi'(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    // Shift up until the asymptotic series is accurate to ~1e-16.
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + series
}

/// Hermite functions normalized against `exp(-u^2)`: entry `j` is
/// `H_j(u) / sqrt(2^j j!)`, built by the three-term recurrence so large
/// orders never overflow.
pub fn scaled_hermite(max_order: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_order + 1);
    out.push(1.0);
    if max_order == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * u);
    for j in 1..max_order {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * u * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
        out.push(next);
    }
    out
}

/// Generalized binomial coefficients `C(-gamma, k)` for `k = 0..terms`.
pub(crate) fn negative_binomial_coefficients(gamma: f64, terms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms);
    let mut c = 1.0;
    for k in 0..terms {
        out.push(c);
        c *= -(gamma + k as f64) / (k as f64 + 1.0);
    }
    out
}
