//! Stochastic approximation solvers: robust stochastic approximation,
//! stochastic mirror descent and the multistep variants for uniformly convex
//! objectives, together with their stepsize and stage-length formulas.

mod multistep;
mod record;
mod sa;

pub use multistep::{
    ball_constants, ball_schedule, fitted_schedule, msmd_ball_run, msmd_budget_run, msmd_run, msmd_run_schedule,
    msmd_schedule, MultistepSchedule, MAX_STAGES,
};
pub use record::{AffineModel, Algorithm, RunRecord, SolverConfig, StageRecord, TracePoint};
pub use sa::{rsa_run, rsa_run_with_draws, rsa_step, smd_run, smd_run_with_draws, smd_step, theta_step};

#[cfg(test)]
mod tests;
