//! Experiment configuration, read from JSON.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Norm;
use crate::problems::{gen_instance1, gen_instance2, CvarInstance, QuadraticInstance};
use crate::prox::SetupKind;

/// What an experiment does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Coverage and width of the three intervals.
    Coverage,
    /// The coverage study over a list of θ values.
    WidthSweep,
    /// Paired single-stage and multistep runs.
    TrajectoryCompare,
    /// One solver run on one instance.
    SingleSolve,
}

/// An instance family with its parameters; the size `n` comes from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// The quadratic problem on the simplex `{Σx = a, x ≥ b}`.
    Quadratic {
        alpha0: f64,
        alpha1: f64,
        #[serde(default)]
        lambda0: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    /// The CVaR portfolio problem on a scenario pool.
    Cvar {
        alpha0: f64,
        alpha1: f64,
        epsilon: f64,
        #[serde(default)]
        lambda0: f64,
        #[serde(default = "default_pool")]
        pool_size: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn default_pool() -> usize {
    10_000
}

impl InstanceSpec {
    /// Label used in file names and seed derivation.
    pub fn label(&self) -> &'static str {
        match self {
            InstanceSpec::Quadratic { .. } => "quadratic",
            InstanceSpec::Cvar { .. } => "cvar",
        }
    }

    pub fn quadratic(&self, n: usize, norm: Norm, seed: u64) -> Result<QuadraticInstance> {
        match *self {
            InstanceSpec::Quadratic {
                alpha0,
                alpha1,
                lambda0,
                a,
                b,
            } => gen_instance1(n, alpha0, alpha1, lambda0, a, b, norm, seed),
            _ => Err(Error::param("not a quadratic instance specification")),
        }
    }

    pub fn cvar(&self, n: usize, seed: u64) -> Result<CvarInstance> {
        match *self {
            InstanceSpec::Cvar {
                alpha0,
                alpha1,
                epsilon,
                lambda0,
                pool_size,
            } => gen_instance2(n, alpha0, alpha1, epsilon, lambda0, pool_size, seed),
            _ => Err(Error::param("not a CVaR instance specification")),
        }
    }
}

/// One cell of the experiment grid: problem size `n` and sample size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
}

/// A batch experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub instance: InstanceSpec,
    pub grid: Vec<GridPoint>,
    /// Replications generated per cell (before filtering).
    pub replications: usize,
    /// Fraction of replications with the smallest asymptotic intervals that
    /// coverage statistics discard.
    #[serde(default = "default_filter")]
    pub filter_fraction: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// θ values of the interval of the second kind.
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_setup")]
    pub setup: SetupKind,
    #[serde(default)]
    pub master_seed: u64,
    /// Output directory; nothing is written when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (capped by the environment).
    #[serde(default)]
    pub workers: Option<usize>,
    /// Certified tolerance of the reference and sample-average solvers.
    #[serde(default = "default_tol")]
    pub reference_tol: f64,
    /// Stage count of the multistep runs in trajectory comparisons; chosen
    /// from the budget when absent.
    #[serde(default)]
    pub stages: Option<usize>,
    /// Trace stride of trajectory runs; about 200 points per run when absent.
    #[serde(default)]
    pub stride: Option<usize>,
}

fn default_filter() -> f64 {
    0.2
}

fn default_alpha() -> f64 {
    0.1
}

fn default_thetas() -> Vec<f64> {
    vec![1.0]
}

fn default_setup() -> SetupKind {
    SetupKind::Entropy
}

fn default_tol() -> f64 {
    1e-8
}

impl ExperimentConfig {
    /// A coverage experiment with default settings.
    pub fn coverage(instance: InstanceSpec, grid: Vec<GridPoint>, replications: usize) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Coverage,
            instance,
            grid,
            replications,
            filter_fraction: default_filter(),
            alpha: default_alpha(),
            thetas: default_thetas(),
            setup: default_setup(),
            master_seed: 0,
            output_dir: None,
            workers: None,
            reference_tol: default_tol(),
            stages: None,
            stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.filter_fraction) {
            return Err(Error::param(format!("filter fraction {} must lie in [0, 1)", self.filter_fraction)));
        }
        if self.grid.is_empty() {
            return Err(Error::param("the experiment grid is empty"));
        }
        if let Some(p) = self.grid.iter().find(|p| p.n == 0 || p.budget < 2) {
            return Err(Error::param(format!("grid point n = {}, N = {} is too small", p.n, p.budget)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("α = {} must lie in (0, 1)", self.alpha)));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::param("θ values must be positive and at least one is needed"));
        }
        if !(self.reference_tol > 0.0 && self.reference_tol.is_finite()) {
            return Err(Error::param("the reference tolerance must be positive"));
        }
        if self.stages == Some(0) || self.stride == Some(0) {
            return Err(Error::param("stages and stride must be positive"));
        }
        if let InstanceSpec::Cvar { .. } = self.instance {
            if self.setup != SetupKind::Euclidean {
                return Err(Error::param("the CVaR instances carry a Euclidean sheet; use the euclidean setup"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}
