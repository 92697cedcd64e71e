//! Robust stochastic approximation and stochastic mirror descent.
//!
//! Both methods share one loop: call the oracle at `x_τ`, accumulate the
//! step-weighted averages `x^N = Γ⁻¹Σγ_τx_τ` and `g^N = Γ⁻¹Σγ_τg(x_τ, ξ_τ)`,
//! then move with the prox mapping of the setup. A run with budget N makes
//! exactly N oracle calls and N − 1 prox steps.

use crate::error::{check_dim, Error, Result};
use crate::linalg::Norm;
use crate::problem::{ConstantSheet, Draw, StochasticProblem};
use crate::prox::{prox_ball_restricted, prox_entropy, prox_pnorm, ProximalSetup, SetupKind};
use crate::seeds::{rng_from_seed, Rng};
use crate::sets::{FeasibleSet, MEMBERSHIP_TOL};

use super::record::{AffineModel, Algorithm, RunRecord, SolverConfig, StageRecord, TracePoint};

/// Where the realizations ξ_τ come from.
pub(crate) enum Feed<'a> {
    /// A fresh stream from the problem's sampler.
    Stream(Box<Rng>),
    /// A pre-drawn sample consumed in order.
    Fixed { draws: &'a [Draw], pos: usize },
}

impl<'a> Feed<'a> {
    pub(crate) fn seeded(seed: u64) -> Self {
        Feed::Stream(Box::new(rng_from_seed(seed)))
    }

    pub(crate) fn fixed(draws: &'a [Draw]) -> Self {
        Feed::Fixed { draws, pos: 0 }
    }

    fn next_into<P: StochasticProblem + ?Sized>(&mut self, problem: &P, buf: &mut Draw) -> Result<()> {
        match self {
            Feed::Stream(rng) => *buf = problem.sample(rng.as_mut()),
            Feed::Fixed { draws, pos } => {
                let d = draws
                    .get(*pos)
                    .ok_or_else(|| Error::param("the supplied sample is shorter than the oracle budget"))?;
                buf.clear();
                buf.extend_from_slice(d);
                *pos += 1;
            }
        }
        Ok(())
    }

    pub(crate) fn seed(&self, seed: u64) -> Option<u64> {
        match self {
            Feed::Stream(_) => Some(seed),
            Feed::Fixed { .. } => None,
        }
    }
}

/// The prox move of one setup, with whatever state it carries between steps.
pub(crate) enum Stepper<'a> {
    Euclidean(&'a FeasibleSet),
    /// Entropy iterates are carried as log-weights.
    Entropy(Vec<f64>),
    PNorm(&'a ProximalSetup),
    Ball {
        setup: &'a ProximalSetup,
        center: Vec<f64>,
        radius: f64,
    },
}

impl<'a> Stepper<'a> {
    pub(crate) fn for_setup(setup: &'a ProximalSetup, start: &[f64]) -> Self {
        match setup.kind() {
            SetupKind::Euclidean => Stepper::Euclidean(setup.set()),
            SetupKind::Entropy => Stepper::Entropy(start.iter().map(|v| v.ln()).collect()),
            SetupKind::PNorm => Stepper::PNorm(setup),
        }
    }

    /// Replaces `x` by `Prox_x(zeta)`.
    fn step(&mut self, x: &mut Vec<f64>, zeta: &[f64]) -> Result<()> {
        match self {
            Stepper::Euclidean(set) => {
                let y: Vec<f64> = x.iter().zip(zeta).map(|(a, b)| a - b).collect();
                *x = set.project(&y)?;
            }
            Stepper::Entropy(log_x) => {
                *log_x = prox_entropy(log_x, zeta)?;
                for (xi, z) in x.iter_mut().zip(log_x.iter()) {
                    *xi = z.exp();
                }
            }
            Stepper::PNorm(setup) => {
                let simplex = setup.set().as_simplex().expect("p-norm setups live on a floor simplex");
                let (p, gamma) = setup.pnorm_params();
                *x = prox_pnorm(x, zeta, simplex, p, gamma)?;
            }
            Stepper::Ball { setup, center, radius } => {
                *x = prox_ball_restricted(setup, center, *radius, x, zeta)?;
            }
        }
        Ok(())
    }

    fn ball(&self) -> Option<(&[f64], f64)> {
        match self {
            Stepper::Ball { center, radius, .. } => Some((center, *radius)),
            _ => None,
        }
    }
}

/// Output of one constant-step stage.
pub(crate) struct Stage {
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    pub x_avg: Vec<f64>,
    pub g_avg: f64,
    pub model: AffineModel,
    pub trace: Vec<TracePoint>,
}

/// Largest allowed distance overshoot of a ball-restricted iterate.
const BALL_TOL: f64 = 1e-7;

/// Runs `calls` oracle calls with the constant step `step` from `start`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_stage<P: StochasticProblem + ?Sized>(
    problem: &P,
    stepper: &mut Stepper<'_>,
    start: &[f64],
    step: f64,
    calls: usize,
    feed: &mut Feed<'_>,
    stride: usize,
    offset: usize,
    stage: usize,
) -> Result<Stage> {
    let n = start.len();
    let set = problem.set();
    let mut x = start.to_vec();
    let mut grad = vec![0.0; n];
    let mut zeta = vec![0.0; n];
    let mut xi = Vec::new();
    let mut acc_x = vec![0.0; n];
    let mut acc_g = 0.0;
    let mut weight = 0.0;
    let mut out = Stage {
        steps: Vec::with_capacity(calls),
        values: Vec::with_capacity(calls),
        x_avg: Vec::new(),
        g_avg: 0.0,
        model: AffineModel::new(n),
        trace: Vec::new(),
    };
    for tau in 1..=calls {
        let residual = set.residual(&x);
        if residual > MEMBERSHIP_TOL {
            return Err(Error::Domain { residual });
        }
        if let Some((center, radius)) = stepper.ball() {
            let d = Norm::L2.dist(&x, center);
            if d > radius + BALL_TOL {
                return Err(Error::Numerical(format!(
                    "iterate left its ball: distance {d} exceeds radius {radius}"
                )));
            }
        }
        feed.next_into(problem, &mut xi)?;
        let value = problem.eval_into(&x, &xi, &mut grad)?;
        if !value.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Numerical(format!("non-finite oracle output at call {}", offset + tau)));
        }
        weight += step;
        acc_g += step * value;
        for (a, v) in acc_x.iter_mut().zip(&x) {
            *a += step * v;
        }
        out.steps.push(step);
        out.values.push(value);
        out.model.push(value, &grad, &x);
        let global = offset + tau;
        if stride > 0 && (global % stride == 0 || tau == calls) {
            out.trace.push(TracePoint {
                iteration: global,
                stage,
                x: x.clone(),
                x_avg: acc_x.iter().map(|a| a / weight).collect(),
                g_avg: acc_g / weight,
            });
        }
        if tau < calls {
            for (z, g) in zeta.iter_mut().zip(&grad) {
                *z = step * g;
            }
            stepper.step(&mut x, &zeta)?;
        }
    }
    out.x_avg = acc_x.iter().map(|a| a / weight).collect();
    out.g_avg = acc_g / weight;
    Ok(out)
}

/// RSA stepsize `γ = D_X/(√(2(M₂² + L²))√N)`.
pub fn rsa_step(constants: &ConstantSheet, d_x: f64, budget: usize) -> f64 {
    d_x / ((2.0 * (constants.m2.powi(2) + constants.l.powi(2))).sqrt() * (budget as f64).sqrt())
}

/// SMD stepsize `γ = D_{ω,X}√μ(ω)/(√(2(M₂² + L²))√N)`.
pub fn smd_step(constants: &ConstantSheet, setup: &ProximalSetup, budget: usize) -> f64 {
    let sc = setup.constants();
    sc.d_omega * sc.mu_omega.sqrt()
        / ((2.0 * (constants.m2.powi(2) + constants.l.powi(2))).sqrt() * (budget as f64).sqrt())
}

/// The θ-parameterized constant step `γ = θ√μ(ω)D_{ω,X}/(M*√N)`.
pub fn theta_step(constants: &ConstantSheet, setup: &ProximalSetup, theta: f64, budget: usize) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::param(format!("θ = {theta} must be positive")));
    }
    let sc = setup.constants();
    Ok(theta * sc.mu_omega.sqrt() * sc.d_omega / (constants.m_star()? * (budget as f64).sqrt()))
}

/// Checks that a setup fits a problem: same set and matching constant norm.
pub(crate) fn check_pairing<P: StochasticProblem + ?Sized>(problem: &P, setup: &ProximalSetup) -> Result<()> {
    if setup.set() != problem.set() {
        return Err(Error::param("the proximal setup is bound to a different feasible set"));
    }
    check_sheet_norm(problem.constants(), setup.norm())
}

pub(crate) fn check_sheet_norm(constants: &ConstantSheet, norm: Norm) -> Result<()> {
    constants.validate()?;
    if constants.norm != norm {
        return Err(Error::param(format!(
            "the constant sheet is stated for the {:?} norm but the method works in the {:?} norm",
            constants.norm, norm
        )));
    }
    Ok(())
}

/// Resolves the start point and the distance bound used by the step formulas.
pub(crate) fn resolve_start(
    set: &FeasibleSet,
    designated: Vec<f64>,
    sheet_d_x: f64,
    norm: Norm,
    config: &SolverConfig,
) -> Result<(Vec<f64>, f64, bool)> {
    match &config.start {
        Some(s) => {
            check_dim(set.dim(), s.len())?;
            set.check_member(s)?;
            Ok((s.clone(), set.max_distance(s, norm), true))
        }
        None => Ok((designated, sheet_d_x, false)),
    }
}

/// Robust stochastic approximation: `x_{t+1} = Π_X(x_t − γG(x_t, ξ_t))`
/// with the RSA stepsize, unless overridden.
pub fn rsa_run<P: StochasticProblem + ?Sized>(problem: &P, config: &SolverConfig) -> Result<RunRecord> {
    single_run(problem, None, config, Feed::seeded(config.seed))
}

/// [`rsa_run`] on a supplied sample (its first `budget` draws are used).
pub fn rsa_run_with_draws<P: StochasticProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    draws: &[Draw],
) -> Result<RunRecord> {
    single_run(problem, None, config, Feed::fixed(draws))
}

/// Stochastic mirror descent: `x_{t+1} = Prox_{x_t}(γG(x_t, ξ_t))` from
/// `x_ω` with the SMD stepsize, unless overridden.
pub fn smd_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    config: &SolverConfig,
) -> Result<RunRecord> {
    single_run(problem, Some(setup), config, Feed::seeded(config.seed))
}

/// [`smd_run`] on a supplied sample (its first `budget` draws are used).
pub fn smd_run_with_draws<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: &ProximalSetup,
    config: &SolverConfig,
    draws: &[Draw],
) -> Result<RunRecord> {
    single_run(problem, Some(setup), config, Feed::fixed(draws))
}

fn single_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    setup: Option<&ProximalSetup>,
    config: &SolverConfig,
    mut feed: Feed<'_>,
) -> Result<RunRecord> {
    config.validate()?;
    let timer = Timer::start();
    let constants = problem.constants();
    let set = problem.set();
    let (algorithm, kind, start, d_x, start_override, own_step, mut stepper);
    match setup {
        None => {
            check_sheet_norm(constants, Norm::L2)?;
            let r = resolve_start(set, set.start_point(), constants.d_x, Norm::L2, config)?;
            (start, d_x, start_override) = r;
            own_step = rsa_step(constants, d_x, config.budget);
            algorithm = Algorithm::Rsa;
            kind = SetupKind::Euclidean;
            stepper = Stepper::Euclidean(set);
        }
        Some(setup) => {
            check_pairing(problem, setup)?;
            let designated = setup.constants().x_omega.clone();
            let r = resolve_start(set, designated, constants.d_x, setup.norm(), config)?;
            (start, d_x, start_override) = r;
            own_step = smd_step(constants, setup, config.budget);
            algorithm = Algorithm::Smd;
            kind = setup.kind();
            stepper = Stepper::for_setup(setup, &start);
        }
    }
    let step = config.step.unwrap_or(own_step);
    let stage = run_stage(problem, &mut stepper, &start, step, config.budget, &mut feed, config.stride, 0, 0)?;
    Ok(RunRecord {
        algorithm,
        setup: kind,
        problem: problem.name().to_string(),
        seed: feed.seed(config.seed),
        budget: config.budget,
        oracle_calls: stage.values.len(),
        start,
        start_override,
        d_x,
        step_override: config.step.is_some(),
        steps: stage.steps,
        values: stage.values,
        x_avg: stage.x_avg,
        g_avg: stage.g_avg,
        model: stage.model,
        trace: stage.trace,
        stages: Vec::new(),
        schedule: None,
        warnings: Vec::new(),
        wall_seconds: timer.seconds(),
    })
}

/// Builds the record of a stage for multistep runs.
pub(crate) fn stage_record(stage: &Stage, step: f64, radius: Option<f64>, start: &[f64]) -> StageRecord {
    StageRecord {
        oracle_calls: stage.values.len(),
        step,
        radius,
        start: start.to_vec(),
        x_avg: stage.x_avg.clone(),
        g_avg: stage.g_avg,
    }
}

/// Wall-clock timer; reports zero where no clock is available (wasm32).
pub(crate) struct Timer {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Timer {
    pub(crate) fn start() -> Self {
        Timer {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
