//! Multistep stochastic mirror descent for uniformly convex objectives.
//!
//! Stage t restarts mirror descent from the previous stage's average `y_t`
//! with a constant step `γ^t` for `N_t − 1` oracle calls. The stage lengths
//! grow geometrically so that the distance to the solution halves (in the
//! ρ-th power) from one stage to the next.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ConstantSheet, StochasticProblem};
use crate::prox::{ProximalSetup, SetupKind};

use super::record::{Algorithm, RunRecord, SolverConfig};
use super::sa::{check_pairing, resolve_start, run_stage, stage_record, Feed, Stepper, Timer};

/// Largest number of stages any schedule may have.
pub const MAX_STAGES: usize = 60;

/// Stage lengths, steps and (for the ball-restricted variant) radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistepSchedule {
    /// `N_t`; stage t makes `N_t − 1` oracle calls.
    pub counts: Vec<usize>,
    /// Constant step `γ^t` of each stage.
    pub steps: Vec<f64>,
    /// Ball radii `D_X/2^{(t−1)/ρ}` of the ball-restricted variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    pub rho: f64,
    /// Distance bound the schedule was computed for.
    pub d_x: f64,
    /// `A(f,ω) = 8(L² + M₂²)M(ω)/(μ(f)²μ(ω)D_X^{2(ρ−1)})`.
    pub a_const: f64,
    /// `β = 2(ρ − 1)/ρ`.
    pub beta: f64,
}

impl MultistepSchedule {
    pub fn stages(&self) -> usize {
        self.counts.len()
    }

    /// Total oracle calls `Σ(N_t − 1)`.
    pub fn total_calls(&self) -> usize {
        self.counts.iter().map(|n| n - 1).sum()
    }
}

/// The constants every schedule formula needs.
struct Inputs {
    sum_sq: f64,
    m_omega: f64,
    mu_omega: f64,
    rho: f64,
    mu_f: f64,
    d_x: f64,
}

impl Inputs {
    fn new(constants: &ConstantSheet, setup: &ProximalSetup, d_x: f64) -> Result<Self> {
        let (rho, mu_f) = constants.uniform_convexity()?;
        let sc = setup.constants();
        let m_omega = sc.m_omega.ok_or(Error::MissingConstant("M(omega)"))?;
        if !(d_x.is_finite() && d_x > 0.0) {
            return Err(Error::param(format!("distance bound {d_x} must be positive")));
        }
        Ok(Inputs {
            sum_sq: constants.l.powi(2) + constants.m2.powi(2),
            m_omega,
            mu_omega: sc.mu_omega,
            rho,
            mu_f,
            d_x,
        })
    }

    fn beta(&self) -> f64 {
        2.0 * (self.rho - 1.0) / self.rho
    }

    fn a_const(&self) -> f64 {
        8.0 * self.sum_sq * self.m_omega
            / (self.mu_f.powi(2) * self.mu_omega * self.d_x.powf(2.0 * (self.rho - 1.0)))
    }

    /// `N_t = 1 + ⌈2^{3+2(t−1)(ρ−1)/ρ}(L² + M₂²)M(ω)/(μ(f)²μ(ω)D_X^{2(ρ−1)})⌉`.
    fn count(&self, t: usize) -> Result<usize> {
        let raw = 2f64.powf(self.beta() * (t as f64 - 1.0)) * self.a_const();
        to_count(raw)
    }

    /// `γ^t = D_X/(2^{(t−1)/ρ}√N_t) · √(M(ω)μ(ω)/(2(L² + M₂²)))`.
    fn step(&self, t: usize, count: usize) -> f64 {
        self.d_x / (2f64.powf((t as f64 - 1.0) / self.rho) * (count as f64).sqrt())
            * (self.m_omega * self.mu_omega / (2.0 * self.sum_sq)).sqrt()
    }

    fn radius(&self, t: usize) -> f64 {
        self.d_x / 2f64.powf((t as f64 - 1.0) / self.rho)
    }

    /// `(K₁, K₂)` of the ball-restricted sizing rule.
    fn ball_constants(&self, constants: &ConstantSheet) -> (f64, f64) {
        let s = (self.m_omega / (2.0 * self.mu_omega * self.sum_sq)).sqrt();
        let scale = self.mu_f * self.d_x.powf(self.rho - 1.0);
        let (l2, m2) = (constants.l.powi(2), constants.m2);
        let k1 = s * (2.0 * l2 + m2 * m2) / scale;
        let k2 = (m2 * m2 * s + 2.0 * m2) / scale;
        (k1, k2)
    }

    fn schedule(&self, counts: Vec<usize>, radii: Option<Vec<f64>>) -> MultistepSchedule {
        let steps = counts.iter().enumerate().map(|(i, &n)| self.step(i + 1, n)).collect();
        MultistepSchedule {
            counts,
            steps,
            radii,
            rho: self.rho,
            d_x: self.d_x,
            a_const: self.a_const(),
            beta: self.beta(),
        }
    }
}

/// `1 + ⌈raw⌉`, shielding exact integers from upward rounding noise.
fn to_count(raw: f64) -> Result<usize> {
    if !(raw.is_finite() && raw > 0.0 && raw < 1e15) {
        return Err(Error::Numerical(format!("stage length {raw} is out of range")));
    }
    Ok(1 + (raw * (1.0 - 1e-12)).ceil() as usize)
}

fn check_stages(m: usize) -> Result<()> {
    if (1..=MAX_STAGES).contains(&m) {
        Ok(())
    } else {
        Err(Error::param(format!("number of stages {m} must lie in 1..={MAX_STAGES}")))
    }
}

/// The schedule of the multistep method with `m` stages, using the sheet's `D_X`.
pub fn msmd_schedule(constants: &ConstantSheet, setup: &ProximalSetup, m: usize) -> Result<MultistepSchedule> {
    schedule_for(constants, setup, m, constants.d_x)
}

fn schedule_for(constants: &ConstantSheet, setup: &ProximalSetup, m: usize, d_x: f64) -> Result<MultistepSchedule> {
    check_stages(m)?;
    let inp = Inputs::new(constants, setup, d_x)?;
    let counts = (1..=m).map(|t| inp.count(t)).collect::<Result<Vec<_>>>()?;
    Ok(inp.schedule(counts, None))
}

/// A schedule with the same geometric shape whose stage lengths are scaled to
/// spend exactly `budget` oracle calls: `N_t − 1 = ⌊c·2^{β(t−1)}⌋` with the
/// last stage absorbing the rounding leftover. Steps follow the usual formula
/// evaluated at the fitted `N_t`.
pub fn fitted_schedule(
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    m: usize,
    budget: usize,
) -> Result<MultistepSchedule> {
    check_stages(m)?;
    let inp = Inputs::new(constants, setup, constants.d_x)?;
    let beta = inp.beta();
    let weights: Vec<f64> = (0..m).map(|t| 2f64.powf(beta * t as f64)).collect();
    let c = budget as f64 / weights.iter().sum::<f64>();
    let mut calls: Vec<usize> = weights.iter().map(|w| (c * w).floor() as usize).collect();
    let used: usize = calls.iter().sum();
    calls[m - 1] += budget - used;
    if calls[0] == 0 {
        return Err(Error::BudgetTooSmall { budget, required: m });
    }
    Ok(inp.schedule(calls.into_iter().map(|c| c + 1).collect(), None))
}

/// The ball-restricted schedule: `N_t` is the larger of the usual length and
/// `⌈2^{2t − 2(t−1)/ρ}(K₁ + ΘK₂)²⌉`.
pub fn ball_schedule(
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    m: usize,
    theta: f64,
) -> Result<MultistepSchedule> {
    ball_schedule_for(constants, setup, m, theta, constants.d_x)
}

fn ball_schedule_for(
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    m: usize,
    theta: f64,
    d_x: f64,
) -> Result<MultistepSchedule> {
    check_stages(m)?;
    if setup.kind() != SetupKind::Euclidean {
        return Err(Error::unsupported("the ball-restricted multistep method needs the Euclidean setup"));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::param(format!("Θ = {theta} must be positive")));
    }
    let inp = Inputs::new(constants, setup, d_x)?;
    let (k1, k2) = inp.ball_constants(constants);
    let mut counts = Vec::with_capacity(m);
    for t in 1..=m {
        let tf = t as f64;
        let sized = 2f64.powf(2.0 * tf - 2.0 * (tf - 1.0) / inp.rho) * (k1 + theta * k2).powi(2);
        let sized = (sized * (1.0 - 1e-12)).ceil();
        if !(sized < 1e15) {
            return Err(Error::Numerical(format!("stage length {sized} is out of range")));
        }
        counts.push(inp.count(t)?.max(sized as usize));
    }
    let radii = (1..=m).map(|t| inp.radius(t)).collect();
    Ok(inp.schedule(counts, Some(radii)))
}

/// `(K₁, K₂)` of the ball-restricted sizing rule for a sheet and setup.
pub fn ball_constants(constants: &ConstantSheet, setup: &ProximalSetup) -> Result<(f64, f64)> {
    Ok(Inputs::new(constants, setup, constants.d_x)?.ball_constants(constants))
}

/// Multistep mirror descent with `m` stages. The start is `x_ω` unless the
/// config overrides it, in which case `D_X` is recomputed from the start.
/// `config.budget` is not used; the schedule fixes the number of calls.
pub fn msmd_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    m: usize,
    config: &SolverConfig,
) -> Result<RunRecord> {
    let (start, d_x, over) = start_of(problem, setup, config)?;
    let schedule = schedule_for(problem.constants(), setup, m, d_x)?;
    let budget = schedule.total_calls();
    run_schedule(problem, setup, schedule, config, Algorithm::Msmd, budget, (start, over), Vec::new())
}

/// Runs an explicit schedule (for example one from [`fitted_schedule`]).
pub fn msmd_run_schedule<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    schedule: &MultistepSchedule,
    config: &SolverConfig,
) -> Result<RunRecord> {
    let (start, _, over) = start_of(problem, setup, config)?;
    let budget = schedule.total_calls();
    run_schedule(problem, setup, schedule.clone(), config, Algorithm::Msmd, budget, (start, over), Vec::new())
}

/// Multistep mirror descent under a budget of `config.budget` oracle calls:
/// runs the largest number of full stages whose calls fit in the budget.
///
/// When the budget is below the size at which the method's accuracy
/// guarantee applies, the run proceeds and records a warning.
pub fn msmd_budget_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    config: &SolverConfig,
) -> Result<RunRecord> {
    config.validate_step()?;
    let (start, d_x, over) = start_of(problem, setup, config)?;
    let constants = problem.constants();
    let inp = Inputs::new(constants, setup, d_x)?;
    let budget = config.budget;
    let first = inp.count(1)? - 1;
    if budget < first {
        return Err(Error::BudgetTooSmall { budget, required: first });
    }
    let mut counts = vec![first + 1];
    let mut used = first;
    while counts.len() < MAX_STAGES {
        let next = inp.count(counts.len() + 1)?;
        if used + next - 1 > budget {
            break;
        }
        used += next - 1;
        counts.push(next);
    }
    let mut warnings = Vec::new();
    let beta = inp.beta();
    let a = inp.a_const();
    let nf = budget as f64;
    let needed = 1.0 + 2.0 * (2f64.powf(beta) + 1.0) / (beta * std::f64::consts::LN_2)
        * (1.0 + (2f64.powf(beta) - 1.0) * nf / a).ln();
    if nf <= needed {
        warnings.push(format!(
            "budget {budget} does not exceed {needed:.1}, the size required by the accuracy guarantee"
        ));
    }
    let schedule = inp.schedule(counts, None);
    run_schedule(problem, setup, schedule, config, Algorithm::MsmdBudget, budget, (start, over), warnings)
}

/// The ball-restricted multistep method: stage t's prox steps are taken over
/// `X ∩ B(y_t, D_X/2^{(t−1)/ρ})`, with stage lengths sized for level `Θ`.
pub fn msmd_ball_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    m: usize,
    theta: f64,
    config: &SolverConfig,
) -> Result<RunRecord> {
    if setup.kind() != SetupKind::Euclidean {
        return Err(Error::unsupported("the ball-restricted multistep method needs the Euclidean setup"));
    }
    let (start, d_x, over) = start_of(problem, setup, config)?;
    let schedule = ball_schedule_for(problem.constants(), setup, m, theta, d_x)?;
    let budget = schedule.total_calls();
    run_schedule(problem, setup, schedule, config, Algorithm::MsmdBall, budget, (start, over), Vec::new())
}

fn start_of<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    config: &SolverConfig,
) -> Result<(Vec<f64>, f64, bool)> {
    check_pairing(problem, setup)?;
    let designated = setup.constants().x_omega.clone();
    resolve_start(problem.set(), designated, problem.constants().d_x, setup.norm(), config)
}

#[allow(clippy::too_many_arguments)]
fn run_schedule<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    schedule: MultistepSchedule,
    config: &SolverConfig,
    algorithm: Algorithm,
    budget: usize,
    (start, start_override): (Vec<f64>, bool),
    warnings: Vec<String>,
) -> Result<RunRecord> {
    if config.step.is_some() {
        return Err(Error::param("multistep methods use their own stage steps; remove the step override"));
    }
    if schedule.counts.is_empty() || schedule.counts.iter().any(|&n| n < 2) {
        return Err(Error::param("every stage needs at least one oracle call"));
    }
    let timer = Timer::start();
    let mut feed = Feed::seeded(config.seed);
    let mut y = start.clone();
    let mut steps = Vec::with_capacity(schedule.total_calls());
    let mut values = Vec::with_capacity(schedule.total_calls());
    let mut trace = Vec::new();
    let mut stages = Vec::with_capacity(schedule.stages());
    let mut last = None;
    for (t, (&count, &step)) in schedule.counts.iter().zip(&schedule.steps).enumerate() {
        let radius = schedule.radii.as_ref().map(|r| r[t]);
        let mut stepper = match radius {
            Some(radius) => Stepper::Ball {
                setup,
                center: y.clone(),
                radius,
            },
            None => Stepper::for_setup(setup, &y),
        };
        let stage = run_stage(problem, &mut stepper, &y, step, count - 1, &mut feed, config.stride, steps.len(), t)?;
        stages.push(stage_record(&stage, step, radius, &y));
        steps.extend_from_slice(&stage.steps);
        values.extend_from_slice(&stage.values);
        trace.extend(stage.trace.iter().cloned());
        y = stage.x_avg.clone();
        last = Some(stage);
    }
    let last = last.expect("schedules have at least one stage");
    Ok(RunRecord {
        algorithm,
        setup: setup.kind(),
        problem: problem.name().to_string(),
        seed: Some(config.seed),
        budget,
        oracle_calls: values.len(),
        start,
        start_override,
        d_x: schedule.d_x,
        step_override: false,
        steps,
        values,
        x_avg: last.x_avg,
        g_avg: last.g_avg,
        model: last.model,
        trace,
        stages,
        schedule: Some(schedule),
        warnings,
        wall_seconds: timer.seconds(),
    })
}
