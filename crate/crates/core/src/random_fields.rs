//! Truncated Karhunen-Loeve sampling and the sparse sign-flip hard instance.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::grid::{FieldFunction, Grid};
use crate::oracles::DiagonalOracle;

/// Distribution of the i.i.d. KL coefficients. Both laws have mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoefficientLaw {
    StandardGaussian,
    /// `+-sqrt(1/p)` with probability `p/2` each, `0` otherwise.
    ThreePoint { p: f64 },
}

impl CoefficientLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CoefficientLaw::StandardGaussian => Ok(()),
            CoefficientLaw::ThreePoint { p } if p > 0.0 && p <= 1.0 => Ok(()),
            CoefficientLaw::ThreePoint { p } => {
                Err(Error::InvalidArgument(format!("three-point sparsity must lie in (0, 1], got {p}")))
            }
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            CoefficientLaw::StandardGaussian => rng.sample(StandardNormal),
            CoefficientLaw::ThreePoint { p } => {
                let u: f64 = rng.random();
                if u < 0.5 * p {
                    (1.0 / p).sqrt()
                } else if u < p {
                    -(1.0 / p).sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Generator for the `index`-th coefficient vector of a seeded sample stream.
///
/// Each index gets its own ChaCha stream, so sample `k` is the same no matter
/// which other samples were drawn or in what order.
pub fn coefficient_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn draw_coefficients(law: CoefficientLaw, m: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = coefficient_rng(seed, index);
    (0..m).map(|_| law.draw(&mut rng)).collect()
}

#[derive(Debug, Clone)]
pub struct KlSample {
    pub index: u64,
    pub coefficients: Vec<f64>,
    pub field: FieldFunction,
}

/// Reusable sampler: the basis table is built once and shared across draws.
#[derive(Debug, Clone)]
pub struct KlSampler {
    table: Arc<BasisTable>,
    sqrt_lambda: Vec<f64>,
    law: CoefficientLaw,
    seed: u64,
}

impl KlSampler {
    pub fn new(sys: &EigenSystem, m: usize, grid: &Arc<Grid>, law: CoefficientLaw, seed: u64) -> Result<Self> {
        let table = Arc::new(BasisTable::new(sys, grid, m)?);
        Self::with_table(sys, table, law, seed)
    }

    /// Uses the leading `table.len()` eigenpairs of `sys`.
    pub fn with_table(sys: &EigenSystem, table: Arc<BasisTable>, law: CoefficientLaw, seed: u64) -> Result<Self> {
        law.validate()?;
        if table.len() > sys.len() {
            return Err(Error::SpectrumExhausted { requested: table.len(), available: sys.len() });
        }
        let sqrt_lambda = sys.eigenvalues()[..table.len()].iter().map(|l| l.max(0.0).sqrt()).collect();
        Ok(KlSampler { table, sqrt_lambda, law, seed })
    }

    pub fn truncation(&self) -> usize {
        self.table.len()
    }

    pub fn law(&self) -> CoefficientLaw {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &Arc<BasisTable> {
        &self.table
    }

    pub fn coefficients(&self, index: u64) -> Vec<f64> {
        draw_coefficients(self.law, self.truncation(), self.seed, index)
    }

    /// Field with the given KL coefficients, `sum_j sqrt(lambda_j) xi_j phi_j`.
    pub fn realize(&self, coefficients: &[f64]) -> FieldFunction {
        let scaled: Vec<f64> = coefficients.iter().zip(&self.sqrt_lambda).map(|(x, s)| x * s).collect();
        FieldFunction::from_parts(self.table.grid().clone(), self.table.synthesize(&scaled))
    }

    pub fn sample(&self, index: u64) -> KlSample {
        let coefficients = self.coefficients(index);
        let field = self.realize(&coefficients);
        KlSample { index, coefficients, field }
    }
}

/// One KL sample (stream index 0) of the first `m` eigenpairs of `sys` on `grid`.
pub fn sample_kl(sys: &EigenSystem, m: usize, grid: &Arc<Grid>, law: CoefficientLaw, seed: u64) -> Result<KlSample> {
    Ok(KlSampler::new(sys, m, grid, law, seed)?.sample(0))
}

#[derive(Debug, Clone)]
pub struct KlProjection {
    /// `<v, phi_j> / sqrt(lambda_j)`; zero where `lambda_j` vanishes.
    pub coefficients: Vec<f64>,
    /// `Pi_m(v) = sum_j <v, phi_j> phi_j`.
    pub reconstruction: FieldFunction,
}

pub fn kl_project(v: &FieldFunction, sys: &EigenSystem, m: usize) -> Result<KlProjection> {
    let table = BasisTable::new(sys, v.grid(), m)?;
    Ok(kl_project_with(v, sys, &table))
}

pub fn kl_project_with(v: &FieldFunction, sys: &EigenSystem, table: &BasisTable) -> KlProjection {
    let inner = table.project(v.values(), table.len());
    let coefficients = inner
        .iter()
        .zip(sys.eigenvalues())
        .map(|(c, &l)| if l > 0.0 { c / l.sqrt() } else { 0.0 })
        .collect();
    let reconstruction = FieldFunction::from_parts(v.grid().clone(), table.synthesize(&inner));
    KlProjection { coefficients, reconstruction }
}

/// `F_sigma = c sum_j sigma_j phi_j (x) phi_j` with the sparse three-point input law.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub signs: Vec<f64>,
    pub scale: f64,
    pub sparsity: f64,
    pub protected: usize,
    pub budget: usize,
    sys: Arc<EigenSystem>,
}

impl HardInstance {
    pub fn system(&self) -> &Arc<EigenSystem> {
        &self.sys
    }

    pub fn law(&self) -> CoefficientLaw {
        CoefficientLaw::ThreePoint { p: self.sparsity }
    }

    /// `||F_sigma||_op`, which is the scale because the signs are units.
    pub fn op_norm(&self) -> f64 {
        self.scale
    }

    /// Exact oracle for `F_sigma` on `grid`, truncated to the stored spectrum.
    pub fn oracle(&self, grid: &Arc<Grid>) -> Result<DiagonalOracle> {
        let table = Arc::new(BasisTable::new(&self.sys, grid, self.signs.len())?);
        Ok(self.oracle_with(table))
    }

    pub fn oracle_with(&self, table: Arc<BasisTable>) -> DiagonalOracle {
        let diag = self.signs[..table.len()].iter().map(|s| self.scale * s).collect();
        DiagonalOracle::new(table, diag, "hard_instance")
    }

    /// `(c^2 / 2) sum_{j<=m} lambda_j`.
    pub fn lower_bound(&self) -> Result<f64> {
        Ok(0.5 * self.scale * self.scale * self.sys.head_sum(self.protected)?)
    }
}

/// Draws uniform signs for every stored eigenpair and sets `p = 1/(2 m n)`.
pub fn make_hard_instance(sys: Arc<EigenSystem>, m: usize, n_budget: usize, c: f64, seed: u64) -> Result<HardInstance> {
    if m < 1 || n_budget < 1 {
        return Err(Error::InvalidArgument("m and n must be at least 1".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs = (0..sys.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    Ok(HardInstance {
        signs,
        scale: c,
        sparsity: 1.0 / (2.0 * m as f64 * n_budget as f64),
        protected: m,
        budget: n_budget,
        sys,
    })
}
