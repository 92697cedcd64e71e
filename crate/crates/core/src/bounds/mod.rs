//! Confidence intervals on the optimal value built from a single solver run,
//! the asymptotic interval of the sample-average approximation, and the
//! calibration of their Θ parameters.
//!
//! With `a(Θ, N) = ΘM₁/√N` and `b(Θ, X, N) = (K₁ + Θ(K₂ − M₁))/√N`, the
//! interval of the first kind is `[g^N − b(Θ₂) − a(Θ₃), g^N + a(Θ₁)]`. The
//! interval of the second kind keeps the same upper end and replaces the
//! lower end by a bound built from the minimum of the averaged affine
//! minorants collected along a constant-step run.

mod quantile;

use serde::{Deserialize, Serialize};

pub use quantile::normal_quantile;

use crate::error::{Error, Result};
use crate::problem::ConstantSheet;
use crate::problems::SaaSolution;
use crate::prox::ProximalSetup;
use crate::solvers::{ball_constants, theta_step, Algorithm, RunRecord};

/// Bisection bracket for the Θ equations.
pub const THETA_BRACKET: (f64, f64) = (1e-6, 50.0);

/// Largest accepted residual of a calibrated Θ.
pub const CALIBRATION_TOL: f64 = 1e-12;

/// Which construction produced an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Smd1,
    Smd2,
    Asymptotic,
    Multistep,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Smd1 => "smd1",
            CiMethod::Smd2 => "smd2",
            CiMethod::Asymptotic => "asymptotic",
            CiMethod::Multistep => "multistep",
        }
    }
}

/// An interval `[low, high]` on the optimal value with nominal level `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: CiMethod,
    /// The Θ values used, in the order of the construction's parameters.
    pub thetas: Vec<f64>,
    /// The constants entering the bounds (K₁, K₂ or their analogues).
    pub constants: Vec<f64>,
    /// Set when the interval degenerated to a point (zero sample variance).
    pub degenerate: bool,
}

impl ConfidenceInterval {
    fn new(
        low: f64,
        high: f64,
        level: f64,
        method: CiMethod,
        thetas: Vec<f64>,
        constants: Vec<f64>,
    ) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) {
            return Err(Error::Numerical(format!("non-finite interval [{low}, {high}]")));
        }
        if low > high {
            return Err(Error::Numerical(format!("inverted interval [{low}, {high}]")));
        }
        Ok(ConfidenceInterval {
            low,
            high,
            level,
            method,
            thetas,
            constants,
            degenerate: low == high,
        })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("α = {alpha} must lie in (0, 1)")))
    }
}

/// Solves `h(Θ) = target` for a strictly decreasing `h` by bisection on
/// [`THETA_BRACKET`], checking monotonicity at every probe.
pub fn bisect_decreasing<H: Fn(f64) -> f64>(h: H, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = THETA_BRACKET;
    let (mut h_lo, mut h_hi) = (h(lo), h(hi));
    if !(h_lo > target && h_hi < target) {
        return Err(Error::Numerical(format!(
            "target {target} is not bracketed by [{h_hi}, {h_lo}] on the Θ bracket"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = h(mid);
        if !(h_mid <= h_lo && h_mid >= h_hi) {
            return Err(Error::Numerical(format!("Θ map is not decreasing near {mid}")));
        }
        if h_mid > target {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    }
    let theta = if (h_lo - target).abs() < (h_hi - target).abs() { lo } else { hi };
    let residual = (h(theta) - target).abs();
    if residual > CALIBRATION_TOL {
        return Err(Error::Numerical(format!("Θ calibration residual {residual:.3e}")));
    }
    Ok(theta)
}

/// Θ parameters of the interval of the first kind at level 1 − α:
/// `Θ₁ = 2√ln(2/α)`, `Θ₃ = 2√ln(4/α)` and `Θ₂` solving
/// `e^{1−Θ²} + e^{−Θ²/4} = α/4`.
pub fn calibrate_thetas_smd1(alpha: f64) -> Result<(f64, f64, f64)> {
    check_alpha(alpha)?;
    let t1 = 2.0 * (2.0 / alpha).ln().sqrt();
    let t3 = 2.0 * (4.0 / alpha).ln().sqrt();
    let t2 = bisect_decreasing(smd1_theta2_map, alpha / 4.0)?;
    Ok((t1, t2, t3))
}

/// `Θ ↦ e^{1−Θ²} + e^{−Θ²/4}`.
pub fn smd1_theta2_map(theta: f64) -> f64 {
    (1.0 - theta * theta).exp() + (-theta * theta / 4.0).exp()
}

/// `Θ₂` of the interval of the second kind, solving
/// `6e^{−Θ²/3} + e^{−Θ²/12} + e^{−0.75Θ√N} = α/2`.
pub fn calibrate_theta_smd2(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::param("sample size must be positive"));
    }
    bisect_decreasing(|t| smd2_theta_map(t, n), alpha / 2.0)
}

/// `Θ ↦ 6e^{−Θ²/3} + e^{−Θ²/12} + e^{−0.75Θ√N}`.
pub fn smd2_theta_map(theta: f64, n: usize) -> f64 {
    6.0 * (-theta * theta / 3.0).exp() + (-theta * theta / 12.0).exp() + (-0.75 * theta * (n as f64).sqrt()).exp()
}

/// `(K₁, K₂)` for robust stochastic approximation with distance bound `d_x`.
pub fn k_constants_rsa(constants: &ConstantSheet, d_x: f64) -> (f64, f64) {
    let (l2, m2) = (constants.l.powi(2), constants.m2);
    let root = (2.0 * (m2 * m2 + l2)).sqrt();
    let k1 = d_x * (m2 * m2 + 2.0 * l2) / root;
    let k2 = d_x * m2 * m2 / root + 2.0 * d_x * m2 + constants.m1;
    (k1, k2)
}

/// `(K₁, K₂)` for stochastic mirror descent with the given setup.
pub fn k_constants_smd(constants: &ConstantSheet, setup: &ProximalSetup) -> (f64, f64) {
    let sc = setup.constants();
    let (l2, m2, mu) = (constants.l.powi(2), constants.m2, sc.mu_omega);
    let root = (2.0 * (m2 * m2 + l2) * mu).sqrt();
    let k1 = sc.d_omega * (m2 * m2 + 2.0 * l2) / root;
    let k2 = sc.d_omega * m2 * m2 / root + 2.0 * sc.d_omega * m2 / mu.sqrt() + constants.m1;
    (k1, k2)
}

/// The interval of the first kind from a run made with the method's own
/// stepsize formula.
pub fn ci_smd1(
    run: &RunRecord,
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if run.step_override {
        return Err(Error::InvalidMethod(
            "the run used a step override; its bounds assume the method's own stepsize".into(),
        ));
    }
    let (k1, k2) = match run.algorithm {
        Algorithm::Rsa => k_constants_rsa(constants, run.d_x),
        Algorithm::Smd => {
            if run.setup != setup.kind() {
                return Err(Error::InvalidMethod(format!(
                    "the run used the {} setup, not {}",
                    run.setup.name(),
                    setup.name()
                )));
            }
            if run.start_override {
                return Err(Error::InvalidMethod("mirror descent bounds assume the run started at x_ω".into()));
            }
            k_constants_smd(constants, setup)
        }
        other => {
            return Err(Error::InvalidMethod(format!("no interval of the first kind for {}", other.name())));
        }
    };
    let (t1, t2, t3) = calibrate_thetas_smd1(alpha)?;
    let sn = (run.oracle_calls as f64).sqrt();
    let a = |t: f64| t * constants.m1 / sn;
    let b = (k1 + t2 * (k2 - constants.m1)) / sn;
    let high = run.g_avg + a(t1);
    let low = run.g_avg - b - a(t3);
    let level = 1.0 - (-t1 * t1 / 4.0).exp() - smd1_theta2_map(t2) - (-t3 * t3 / 4.0).exp();
    ConfidenceInterval::new(low, high, level, CiMethod::Smd1, vec![t1, t2, t3], vec![k1, k2])
}

/// The interval of the second kind from a mirror descent run made with the
/// θ-parameterized constant step.
pub fn ci_smd2(
    run: &RunRecord,
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    alpha: f64,
    theta: f64,
) -> Result<ConfidenceInterval> {
    if !matches!(run.algorithm, Algorithm::Smd | Algorithm::Rsa) || run.setup != setup.kind() {
        return Err(Error::InvalidMethod("the interval of the second kind needs a single-stage run".into()));
    }
    let n = run.oracle_calls;
    if run.model.count != n || n == 0 {
        return Err(Error::InvalidMethod("the run carries no affine-model aggregates".into()));
    }
    let expected = theta_step(constants, setup, theta, n)?;
    if run.steps.iter().any(|&s| (s - expected).abs() > 1e-12 * expected) {
        return Err(Error::InvalidMethod(format!(
            "the run did not use the θ-step {expected:.6e} for θ = {theta}"
        )));
    }
    let (t1, _, _) = calibrate_thetas_smd1(alpha)?;
    let t2 = calibrate_theta_smd2(alpha, n)?;
    let sc = setup.constants();
    let sn = (n as f64).sqrt();
    let scale = sc.d_omega * constants.m_star()? / sc.mu_omega.sqrt();
    let f_low = run.model.lower_bound(setup.set())?;
    let low = f_low
        - ((1.0 / (2.0 * theta) + 2.0 * theta) * scale + t2 * (constants.m1 + (8.0 + 2.0 * theta / sn) * scale))
            / sn;
    let high = run.g_avg + t1 * constants.m1 / sn;
    let level = 1.0 - (-t1 * t1 / 4.0).exp() - smd2_theta_map(t2, n);
    ConfidenceInterval::new(low, high, level, CiMethod::Smd2, vec![t1, t2], vec![scale, f_low])
}

/// The asymptotic interval `f̂ ± q(1 − α/2)σ̂/√N` of the sample-average
/// approximation. A zero-variance sample yields the point interval, flagged
/// as degenerate.
pub fn ci_asymptotic(saa: &SaaSolution, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let n = saa.values.len();
    if n == 0 {
        return Err(Error::param("the sample-average solution carries no sample values"));
    }
    let q = normal_quantile(1.0 - alpha / 2.0)?;
    let half = q * saa.sigma / (n as f64).sqrt();
    ConfidenceInterval::new(
        saa.value - half,
        saa.value + half,
        1.0 - alpha,
        CiMethod::Asymptotic,
        Vec::new(),
        vec![q, saa.sigma],
    )
}

/// The interval `g ± (μ(f)D_X^ρ/2^m + ΘM₁/√N_m)` of the ball-restricted
/// multistep method, valid at level `1 − 2m e^{1−Θ} − 2e^{−Θ²/4}` when every
/// stage length satisfies the sizing rule for `Θ` (checked).
pub fn ci_multistep(
    run: &RunRecord,
    constants: &ConstantSheet,
    setup: &ProximalSetup,
    theta: f64,
) -> Result<ConfidenceInterval> {
    if run.algorithm != Algorithm::MsmdBall {
        return Err(Error::InvalidMethod("the multistep interval needs a ball-restricted run".into()));
    }
    let schedule = run.schedule.as_ref().ok_or_else(|| Error::InvalidMethod("run has no schedule".into()))?;
    let (rho, mu_f) = constants.uniform_convexity()?;
    let mut sheet = constants.clone();
    sheet.d_x = schedule.d_x;
    let (k1, k2) = ball_constants(&sheet, setup)?;
    for (k, &n_k) in schedule.counts.iter().enumerate() {
        let kf = (k + 1) as f64;
        let need = 2f64.powf(2.0 * kf - 2.0 * (kf - 1.0) / rho) * (k1 + theta * k2).powi(2);
        if (n_k as f64) < need * (1.0 - 1e-12) {
            return Err(Error::InvalidMethod(format!(
                "stage {} has {n_k} points, below the {need:.0} required for Θ = {theta}",
                k + 1
            )));
        }
    }
    let m = schedule.stages() as f64;
    let n_last = run.final_stage_calls() as f64;
    let half = mu_f * schedule.d_x.powf(rho) / 2f64.powf(m) + theta * constants.m1 / n_last.sqrt();
    let level = 1.0 - 2.0 * m * (1.0 - theta).exp() - 2.0 * (-theta * theta / 4.0).exp();
    ConfidenceInterval::new(
        run.g_avg - half,
        run.g_avg + half,
        level.max(0.0),
        CiMethod::Multistep,
        vec![theta],
        vec![k1, k2],
    )
}

/// Bound on `E|g^N − f*|` for robust stochastic approximation:
/// `(M₁ + D_X√(2(M₂² + L²)))/√N`.
pub fn mean_error_bound_rsa(constants: &ConstantSheet, d_x: f64, n: usize) -> f64 {
    (constants.m1 + d_x * (2.0 * (constants.m2.powi(2) + constants.l.powi(2))).sqrt()) / (n as f64).sqrt()
}

/// Bound on `E|g^N − f*|` for mirror descent:
/// `(M₁ + (D_{ω,X}/√μ(ω))√(2(M₂² + L²)))/√N`.
pub fn mean_error_bound_smd(constants: &ConstantSheet, setup: &ProximalSetup, n: usize) -> f64 {
    let sc = setup.constants();
    (constants.m1 + sc.d_omega / sc.mu_omega.sqrt() * (2.0 * (constants.m2.powi(2) + constants.l.powi(2))).sqrt())
        / (n as f64).sqrt()
}

/// Bound on `E‖x^N − x*‖^ρ` for mirror descent on a uniformly convex
/// objective: `D_{ω,X}√(2(M₂² + L²))/(μ(f)√μ(ω)√N)`.
pub fn solution_bound_smd(constants: &ConstantSheet, setup: &ProximalSetup, n: usize) -> Result<f64> {
    let (_, mu_f) = constants.uniform_convexity()?;
    let sc = setup.constants();
    Ok(sc.d_omega * (2.0 * (constants.m2.powi(2) + constants.l.powi(2))).sqrt()
        / (mu_f * sc.mu_omega.sqrt() * (n as f64).sqrt()))
}

#[cfg(test)]
mod tests;
