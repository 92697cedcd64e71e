//! Run configuration and the record a solver run leaves behind.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::prox::SetupKind;
use crate::sets::FeasibleSet;

use super::multistep::MultistepSchedule;

/// Which algorithm produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Robust stochastic approximation (projected stochastic subgradient).
    Rsa,
    /// Stochastic mirror descent.
    Smd,
    /// Multistep stochastic mirror descent with a fixed number of steps.
    Msmd,
    /// Multistep stochastic mirror descent under an oracle budget.
    MsmdBudget,
    /// Multistep stochastic mirror descent with ball-restricted prox steps.
    MsmdBall,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rsa => "rsa",
            Algorithm::Smd => "smd",
            Algorithm::Msmd => "msmd",
            Algorithm::MsmdBudget => "msmd_budget",
            Algorithm::MsmdBall => "msmd_ball",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsa" => Ok(Algorithm::Rsa),
            "smd" => Ok(Algorithm::Smd),
            "msmd" => Ok(Algorithm::Msmd),
            "msmd_budget" | "msmd-budget" => Ok(Algorithm::MsmdBudget),
            "msmd_ball" | "msmd-ball" => Ok(Algorithm::MsmdBall),
            other => Err(Error::param(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Settings shared by every solver.
///
/// `budget` is the number of oracle calls of a single-step run and the total
/// allowance of the budgeted multistep method; the fixed-step multistep
/// methods derive their budget from the schedule and ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub budget: usize,
    pub seed: u64,
    /// Constant step replacing the method's own stepsize formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Start point replacing the method's designated one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Record every `stride`-th iterate in the trace; 0 disables the trace.
    #[serde(default)]
    pub stride: usize,
}

impl SolverConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        SolverConfig {
            budget,
            seed,
            step: None,
            start: None,
            stride: 0,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 {
            return Err(Error::param(format!("oracle budget {} must be at least 2", self.budget)));
        }
        self.validate_step()
    }

    pub(crate) fn validate_step(&self) -> Result<()> {
        match self.step {
            Some(g) if !(g.is_finite() && g > 0.0) => {
                Err(Error::param(format!("step override {g} must be positive and finite")))
            }
            _ => Ok(()),
        }
    }
}

/// Streaming aggregates of the affine minorants `g_t + G_tᵀ(x − x_t)`,
/// enough to evaluate the online lower model without storing the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub count: usize,
    /// `Σ g(x_t, ξ_t)`.
    pub sum_value: f64,
    /// `Σ G(x_t, ξ_t)`.
    pub sum_grad: Vec<f64>,
    /// `Σ G(x_t, ξ_t)ᵀx_t`.
    pub sum_grad_dot_x: f64,
}

impl AffineModel {
    pub fn new(dim: usize) -> Self {
        AffineModel {
            count: 0,
            sum_value: 0.0,
            sum_grad: vec![0.0; dim],
            sum_grad_dot_x: 0.0,
        }
    }

    pub(crate) fn push(&mut self, value: f64, grad: &[f64], x: &[f64]) {
        self.count += 1;
        self.sum_value += value;
        for (s, g) in self.sum_grad.iter_mut().zip(grad) {
            *s += g;
        }
        self.sum_grad_dot_x += dot(grad, x);
    }

    /// `min_{x∈X} (1/N) Σ [g_t + G_tᵀ(x − x_t)]`, one linear minimization.
    pub fn lower_bound(&self, set: &FeasibleSet) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::InvalidMethod("the affine model is empty".into()));
        }
        let n = self.count as f64;
        let c: Vec<f64> = self.sum_grad.iter().map(|g| g / n).collect();
        let v = set.lmo(&c)?;
        Ok((self.sum_value - self.sum_grad_dot_x) / n + dot(&c, &v))
    }
}

/// One thinned trajectory sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Global 1-based oracle-call index.
    pub iteration: usize,
    /// Index of the multistep stage (0 for single-step runs).
    pub stage: usize,
    /// The iterate `x_τ` at which the oracle was called.
    pub x: Vec<f64>,
    /// Step-weighted running average of the stage's iterates up to `τ`.
    pub x_avg: Vec<f64>,
    /// Step-weighted running average of the stage's oracle values up to `τ`.
    pub g_avg: f64,
}

/// Outcome of one multistep stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub oracle_calls: usize,
    pub step: f64,
    /// Radius of the ball the stage was restricted to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Stage start `y_t`.
    pub start: Vec<f64>,
    /// Stage output `y_{t+1}`.
    pub x_avg: Vec<f64>,
    pub g_avg: f64,
}

/// Everything a run produced.
///
/// `steps` and `values` hold the step and oracle value of every call, so the
/// averages can be recomputed; `x_avg` and `g_avg` are the step-weighted
/// averages of the (last stage's) iterates and values, and `model` aggregates
/// the last stage's affine minorants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub setup: SetupKind,
    pub problem: String,
    /// Seed of the oracle stream, absent when the draws were supplied.
    pub seed: Option<u64>,
    /// Configured budget.
    pub budget: usize,
    pub oracle_calls: usize,
    pub start: Vec<f64>,
    pub start_override: bool,
    /// Distance bound from the start used by the stepsize formulas.
    pub d_x: f64,
    pub step_override: bool,
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    pub x_avg: Vec<f64>,
    pub g_avg: f64,
    pub model: AffineModel,
    pub trace: Vec<TracePoint>,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<MultistepSchedule>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

impl RunRecord {
    /// Equality of everything but the wall-clock time.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        let mut a = self.clone();
        a.wall_seconds = other.wall_seconds;
        &a == other
    }

    /// The step of the last stage (the constant step of single-step runs).
    pub fn final_step(&self) -> f64 {
        self.steps.last().copied().unwrap_or(0.0)
    }

    /// Number of oracle calls of the last stage.
    pub fn final_stage_calls(&self) -> usize {
        self.stages.last().map_or(self.oracle_calls, |s| s.oracle_calls)
    }
}
