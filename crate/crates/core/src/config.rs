//! Run configuration, loaded from TOML. Every key is optional; missing keys
//! take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{make_regular_decomposition, Rect};
use crate::losses::{LossWeights, Mode, Schedule};
use crate::neuralnet::{Activation, AdamConfig};
use crate::problems::PoissonProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub reset_optimizer_state: bool,
    pub problem: ProblemConfig,
    pub decomposition: DecompositionConfig,
    pub budgets: BudgetConfig,
    pub architecture: ArchitectureConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub omega1: f64,
    pub omega2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub nx: usize,
    pub ny: usize,
    pub overlap_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(rename = "N_interior_total")]
    pub n_interior_total: usize,
    #[serde(rename = "N_boundary_interface_total")]
    pub n_boundary_interface_total: usize,
    #[serde(rename = "N_coarse")]
    pub n_coarse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub base_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epochs_per_training: usize,
    pub outer_iterations: usize,
    pub lambda_interior: f64,
    pub lambda_boundary: f64,
    pub lambda_interface: f64,
    pub lambda_f_value: f64,
    pub lambda_c_base: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::TwoLevel,
            seeds: vec![0, 1, 2],
            reset_optimizer_state: false,
            problem: ProblemConfig::default(),
            decomposition: DecompositionConfig::default(),
            budgets: BudgetConfig::default(),
            architecture: ArchitectureConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            omega1: 1.0,
            omega2: 1.0,
        }
    }
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            nx: 2,
            ny: 2,
            overlap_fraction: 0.3,
        }
    }
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            n_interior_total: 30_000,
            n_boundary_interface_total: 16_000,
            n_coarse: 4_000,
        }
    }
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            hidden: vec![30, 30],
            activation: Activation::Tanh,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        OptimizerConfig {
            base_rate: a.base_rate,
            decay_factor: a.decay_factor,
            decay_interval: a.decay_interval,
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = Schedule::default();
        ScheduleConfig {
            epochs_per_training: 2500,
            outer_iterations: 15,
            lambda_interior: 1.0,
            lambda_boundary: 1.0,
            lambda_interface: 1.0,
            lambda_f_value: s.lambda_f_value,
            lambda_c_base: s.lambda_c_base,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { nx: 100, ny: 100 }
    }
}

fn positive(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(key, "must be a positive integer"));
    }
    Ok(())
}

fn finite_nonneg(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

impl RunConfig {
    /// Parses TOML text; errors name the offending key path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<document>".to_string() } else { path };
            Error::config(key, e.into_inner().message().trim().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Full-resolution TOML echo; reloading it gives an identical config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(Error::config("seeds", "seeds must fit in a signed 64-bit integer"));
        }
        let p = &self.problem;
        for (key, v) in [("problem.omega1", p.omega1), ("problem.omega2", p.omega2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        let d = &self.decomposition;
        positive("decomposition.nx", d.nx)?;
        positive("decomposition.ny", d.ny)?;
        if !(d.overlap_fraction > 0.0 && d.overlap_fraction < 1.0) {
            return Err(Error::config(
                "decomposition.overlap_fraction",
                format!("must lie in the open interval (0, 1), got {}", d.overlap_fraction),
            ));
        }
        make_regular_decomposition(Rect::unit(), d.nx, d.ny, d.overlap_fraction)
            .map_err(|e| Error::config("decomposition", e.to_string()))?;
        let b = &self.budgets;
        positive("budgets.N_interior_total", b.n_interior_total)?;
        positive("budgets.N_boundary_interface_total", b.n_boundary_interface_total)?;
        positive("budgets.N_coarse", b.n_coarse)?;
        let s_count = d.nx * d.ny;
        if b.n_interior_total < s_count {
            return Err(Error::config(
                "budgets.N_interior_total",
                format!("must be at least the subdomain count {s_count}"),
            ));
        }
        if b.n_boundary_interface_total < 4 * s_count {
            return Err(Error::config(
                "budgets.N_boundary_interface_total",
                format!("must be at least four points per subdomain ({})", 4 * s_count),
            ));
        }
        if self.architecture.hidden.is_empty() {
            return Err(Error::config("architecture.hidden", "at least one hidden layer is required"));
        }
        if self.architecture.hidden.contains(&0) {
            return Err(Error::config("architecture.hidden", "layer widths must be positive"));
        }
        let o = &self.optimizer;
        if !(o.base_rate.is_finite() && o.base_rate > 0.0) {
            return Err(Error::config("optimizer.base_rate", "must be finite and > 0"));
        }
        if !(o.decay_factor > 0.0 && o.decay_factor <= 1.0) {
            return Err(Error::config("optimizer.decay_factor", "must lie in (0, 1]"));
        }
        if o.decay_interval == 0 {
            return Err(Error::config("optimizer.decay_interval", "must be a positive integer"));
        }
        let s = &self.schedule;
        positive("schedule.epochs_per_training", s.epochs_per_training)?;
        finite_nonneg("schedule.lambda_interior", s.lambda_interior)?;
        finite_nonneg("schedule.lambda_boundary", s.lambda_boundary)?;
        finite_nonneg("schedule.lambda_interface", s.lambda_interface)?;
        finite_nonneg("schedule.lambda_f_value", s.lambda_f_value)?;
        if !(0.0..=1.0).contains(&s.lambda_c_base) {
            return Err(Error::config("schedule.lambda_c_base", "must lie in [0, 1]"));
        }
        let e = &self.evaluation;
        if e.nx < 2 || e.ny < 2 {
            return Err(Error::config("evaluation", "grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<PoissonProblem> {
        PoissonProblem::on_unit_square(self.problem.omega1, self.problem.omega2)
    }

    /// `2, hidden..., 1`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![2];
        sizes.extend(&self.architecture.hidden);
        sizes.push(1);
        sizes
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            base_rate: self.optimizer.base_rate,
            decay_factor: self.optimizer.decay_factor,
            decay_interval: self.optimizer.decay_interval,
        }
    }

    pub fn coupling_schedule(&self) -> Schedule {
        Schedule {
            lambda_f_value: self.schedule.lambda_f_value,
            lambda_c_base: self.schedule.lambda_c_base,
        }
    }

    /// Loss weights with `(λ_f, λ_c)` filled in.
    pub fn loss_weights(&self, lambda_f: f64, lambda_c: f64) -> LossWeights {
        LossWeights {
            lambda_interior: self.schedule.lambda_interior,
            lambda_boundary: self.schedule.lambda_boundary,
            lambda_interface: self.schedule.lambda_interface,
            lambda_f,
            lambda_c,
        }
    }
}
