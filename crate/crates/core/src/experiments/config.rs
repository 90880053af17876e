use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::NoiseMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Poisson,
    Heat,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Poisson => "poisson",
            Equation::Heat => "heat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Spectral,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Active,
    PassiveLsq,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Active => "active",
            EstimatorKind::PassiveLsq => "passive_lsq",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    DirichletBox,
    /// Only usable for bound-only sweeps; the PDE oracles need a box.
    Torus,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::DirichletBox => "dirichlet_box",
            KernelFamily::Torus => "torus",
        }
    }
}

/// Covariance `alpha (-Laplacian + beta I)^-gamma`; unset values take the
/// equation's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub family: Option<KernelFamily>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub kernel: KernelConfig,
    pub grid_size: usize,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub n_test: usize,
    /// KL truncation; defaults to `max(4 * max budget, 1024)`.
    pub truncation: Option<usize>,
    pub oracle: OracleKind,
    pub epsilon: f64,
    pub noise: NoiseMode,
    pub estimators: Vec<EstimatorKind>,
    pub trunc_tol: f64,
    pub tau: f64,
    pub steps: usize,
    pub seed: u64,
    /// Gamma values for sweeps; empty means the kernel's gamma alone.
    pub gammas: Vec<f64>,
    /// Sweeps evaluate the analytic bounds only, without Monte Carlo.
    pub bound_only: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            equation: Equation::Poisson,
            kernel: KernelConfig::default(),
            grid_size: 64,
            budgets: vec![4, 8, 16, 32, 64, 128, 256],
            trials: 5,
            n_test: 100,
            truncation: None,
            oracle: OracleKind::Spectral,
            epsilon: 0.0,
            noise: NoiseMode::FixedDirection,
            estimators: vec![EstimatorKind::Active, EstimatorKind::PassiveLsq],
            trunc_tol: crate::estimators::DEFAULT_TRUNC_TOL,
            tau: 1e-2,
            steps: 1000,
            seed: 0,
            gammas: Vec::new(),
            bound_only: false,
            output: None,
        }
    }
}

/// Kernel parameters after defaults are applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolvedKernel {
    pub family: KernelFamily,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dim: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn kernel(&self) -> ResolvedKernel {
        let (alpha, beta, gamma) = match self.equation {
            // 50^2 (-Laplacian + I)^-2
            Equation::Poisson => (2500.0, 1.0, 2.0),
            // (-Laplacian + I)^-1.5
            Equation::Heat => (1.0, 1.0, 1.5),
        };
        ResolvedKernel {
            family: self.kernel.family.unwrap_or(KernelFamily::DirichletBox),
            alpha: self.kernel.alpha.unwrap_or(alpha),
            beta: self.kernel.beta.unwrap_or(beta),
            gamma: self.kernel.gamma.unwrap_or(gamma),
            dim: self.kernel.dim.unwrap_or(2),
        }
    }

    pub fn max_budget(&self) -> usize {
        self.budgets.iter().copied().max().unwrap_or(0)
    }

    pub fn truncation(&self) -> usize {
        let floor = if self.kernel().dim == 1 { 256 } else { 1024 };
        self.truncation.unwrap_or_else(|| (4 * self.max_budget()).max(floor))
    }

    pub fn gamma_list(&self) -> Vec<f64> {
        if self.gammas.is_empty() {
            vec![self.kernel().gamma]
        } else {
            self.gammas.clone()
        }
    }

    /// Copy with a different kernel gamma.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut c = self.clone();
        c.kernel.gamma = Some(gamma);
        c.gammas.clear();
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return bad("budgets must be a nonempty list of positive integers".into());
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("budgets must be strictly ascending, got {:?}", self.budgets));
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.n_test < 1 {
            return bad("n_test must be at least 1".into());
        }
        let k = self.kernel();
        if !self.bound_only {
            if !self.grid_size.is_power_of_two() || !(16..=256).contains(&self.grid_size) {
                return bad(format!("grid_size must be a power of two in [16, 256], got {}", self.grid_size));
            }
            if self.estimators.is_empty() {
                return bad("at least one estimator is required".into());
            }
            if k.family != KernelFamily::DirichletBox || k.dim != 2 {
                return bad("PDE experiments need a 2d dirichlet_box kernel".into());
            }
            if self.truncation() < self.max_budget() {
                return bad(format!(
                    "truncation {} is below the largest budget {}",
                    self.truncation(),
                    self.max_budget()
                ));
            }
        }
        if !(k.alpha > 0.0 && k.beta > 0.0) {
            return bad("kernel alpha and beta must be positive".into());
        }
        if !(1..=2).contains(&k.dim) {
            return bad(format!("kernel dim must be 1 or 2, got {}", k.dim));
        }
        for g in self.gamma_list() {
            if !(2.0 * g > k.dim as f64) {
                return bad(format!("gamma {g} violates 2*gamma > dim = {}", k.dim));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.tau >= 0.0) || self.steps < 1 {
            return bad("heat settings need tau >= 0 and steps >= 1".into());
        }
        if !(self.trunc_tol >= 0.0 && self.trunc_tol < 1.0) {
            return bad(format!("trunc_tol must lie in [0, 1), got {}", self.trunc_tol));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardSystem {
    Brownian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowerBoundConfig {
    pub system: HardSystem,
    /// Number of protected leading directions.
    pub m: usize,
    /// Training budget.
    pub n: usize,
    /// Operator norm of the hard instance.
    pub c: f64,
    /// Trials with a fitted estimator and Monte Carlo risk.
    pub trials: usize,
    /// Trials for the event frequency, which only needs coefficients.
    pub event_trials: usize,
    pub n_test: usize,
    pub truncation: usize,
    pub grid_size: usize,
    pub trunc_tol: f64,
    pub include_active: bool,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig {
            system: HardSystem::Brownian,
            m: 10,
            n: 20,
            c: 1.0,
            trials: 200,
            event_trials: 10_000,
            n_test: 50,
            truncation: 200,
            grid_size: 512,
            trunc_tol: crate::estimators::DEFAULT_TRUNC_TOL,
            include_active: true,
            seed: 0,
            output: None,
        }
    }
}

impl LowerBoundConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn sparsity(&self) -> f64 {
        1.0 / (2.0 * self.m as f64 * self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m < 1 || self.n < 1 {
            return bad("m and n must be at least 1".into());
        }
        let p = self.sparsity();
        if !(p > 0.0 && p < 1.0) {
            return bad(format!("sparsity p = 1/(2mn) = {p} must lie in (0, 1)"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if self.trials < 1 || self.n_test < 1 {
            return bad("trials and n_test must be at least 1".into());
        }
        if self.truncation < self.m.max(self.n) {
            return bad(format!("truncation {} must cover m and n", self.truncation));
        }
        if self.grid_size < self.truncation + 2 {
            return bad(format!(
                "grid_size {} cannot resolve {} Brownian modes",
                self.grid_size, self.truncation
            ));
        }
        if !(self.trunc_tol >= 0.0 && self.trunc_tol < 1.0) {
            return bad(format!("trunc_tol must lie in [0, 1), got {}", self.trunc_tol));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_equation() {
        let cfg = ExperimentConfig::from_toml_str("equation = \"heat\"").unwrap();
        let k = cfg.kernel();
        assert_eq!((k.alpha, k.beta, k.gamma), (1.0, 1.0, 1.5));
        let cfg = ExperimentConfig::from_toml_str("[kernel]\ngamma = 2.5").unwrap();
        assert_eq!(cfg.kernel().alpha, 2500.0);
        assert_eq!(cfg.kernel().gamma, 2.5);
        assert_eq!(cfg.truncation(), 1024);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "trials = 0",
            "budgets = [8, 4]",
            "budgets = []",
            "grid_size = 48",
            "grid_size = 512",
            "epsilon = -1.0",
            "[kernel]\ngamma = 1.0",
        ] {
            let cfg = ExperimentConfig::from_toml_str(text).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{text}");
        }
        assert!(ExperimentConfig::from_toml_str("no_such_key = 1").is_err());
    }

    #[test]
    fn lower_bound_sparsity() {
        let cfg = LowerBoundConfig { m: 1, n: 1, ..Default::default() };
        assert_eq!(cfg.sparsity(), 0.5);
        cfg.validate().unwrap();
    }
}
