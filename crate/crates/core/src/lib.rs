//! Active data collection for learning linear operators between function spaces.
//!
//! The learner queries an oracle on the leading eigenfunctions of the input
//! covariance kernel and fits `sum_i O(phi_i) (x) phi_i`. The crate provides the
//! kernel eigensystems, Karhunen-Loeve samplers, PDE solution oracles, active and
//! passive estimators, the matching upper and lower risk bounds, and a
//! configuration-driven experiment runner.

pub mod basis;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod oracles;
pub mod random_fields;
pub mod special;

pub use basis::BasisTable;
pub use bounds::{fit_loglog_slope, lower_bound_value, op_norm_estimate, upper_bound, BoundReport, SlopeFit};
pub use eigen::{
    brownian_eigensystem, dirichlet_box_eigensystem, nystrom_eigensystem, rbf_eigensystem_1d, rbf_eigensystem_nd,
    torus_eigensystem, EigenSystem, RbfEigParams,
};
pub use error::{Error, Result};
pub use estimators::{
    expected_risk_mc, fit_active, fit_passive_lsq, relative_mse, RankOneOperator, RiskMetric, RiskReport,
};
pub use grid::{inner_product, l2_norm, l2_norm_sq, Domain, FieldFunction, Grid, Layout, Measure};
pub use oracles::{
    HeatFd, HeatSpectral, NoiseMode, NoisyOracle, Oracle, OracleDescriptor, PoissonFd, PoissonSpectral,
};
pub use random_fields::{kl_project, make_hard_instance, sample_kl, CoefficientLaw, HardInstance, KlSampler};

/// Derives an independent 64-bit seed from a base seed and a path of tags (splitmix64 mixing).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}
