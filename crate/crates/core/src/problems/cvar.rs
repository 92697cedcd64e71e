//! CVaR portfolio instance on a finite scenario pool.
//!
//! Decision `x̃ = (x₀, x)` with `|x₀| ≤ 1` and `x` in the probability simplex;
//! the integrand is
//! `g(x̃, ξ) = α₀ξᵀx + α₁(x₀ + ε⁻¹[ξᵀx − x₀]⁺) + λ₀‖x̃‖₂²`,
//! whose expectation over the pool is `α₀ξ̄ᵀx + α₁ CVaR_ε(ξᵀx) + λ₀‖x̃‖²`
//! after minimizing over `x₀`. The pool is the distribution, so the exact
//! objective is one pass over it.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::reference::{accelerated_descent, certified, Optimum};
use super::SaaSolution;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Norm};
use crate::problem::{ConstantSheet, Draw, StochasticProblem};
use crate::seeds::rng_from_seed;
use crate::sets::{FeasibleSet, FloorSimplex};

/// Parameters of the CVaR instance. The scenario pool is regenerated from
/// the seed, so it is never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvarParams {
    pub n: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub epsilon: f64,
    pub lambda0: f64,
    pub pool_size: usize,
    pub seed: u64,
}

impl Default for CvarParams {
    fn default() -> Self {
        CvarParams {
            n: 41,
            alpha0: 0.9,
            alpha1: 0.1,
            epsilon: 0.9,
            lambda0: 0.0,
            pool_size: 10_000,
            seed: 0,
        }
    }
}

/// A generated CVaR instance.
#[derive(Debug, Clone)]
pub struct CvarInstance {
    params: CvarParams,
    /// Scenario pool, one row per scenario.
    pool: Vec<Vec<f64>>,
    pool_mean: Vec<f64>,
    set: FeasibleSet,
    constants: ConstantSheet,
}

/// Generates the instance with a pool drawn i.i.d. uniform on `[−1, 1]ⁿ`.
pub fn gen_instance2(
    n: usize,
    alpha0: f64,
    alpha1: f64,
    epsilon: f64,
    lambda0: f64,
    pool_size: usize,
    seed: u64,
) -> Result<CvarInstance> {
    CvarInstance::generate(CvarParams {
        n,
        alpha0,
        alpha1,
        epsilon,
        lambda0,
        pool_size,
        seed,
    })
}

/// The printed constants for the CVaR instance in the ℓ₂ norm:
/// `(L, M₁, M₂, M*)`.
pub fn cvar_constants(n: usize, alpha0: f64, alpha1: f64, epsilon: f64, lambda0: f64) -> (f64, f64, f64, f64) {
    let n = n as f64;
    let tail = alpha0 + alpha1 / epsilon;
    let radical = (alpha1 * alpha1 * (1.0 - 1.0 / epsilon).powi(2) + n * tail * tail).sqrt();
    let l = radical + 2.0 * lambda0;
    let m1 = 2.0 * tail;
    let m2 = ((alpha1 / epsilon).powi(2) + 4.0 * n * tail * tail).sqrt();
    (l, m1, m2, radical)
}

impl CvarInstance {
    pub fn generate(params: CvarParams) -> Result<Self> {
        if params.pool_size == 0 {
            return Err(Error::param("the scenario pool must not be empty"));
        }
        let mut rng = rng_from_seed(params.seed);
        let pool: Vec<Vec<f64>> = (0..params.pool_size)
            .map(|_| (0..params.n).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        Self::with_pool(params, pool)
    }

    /// Builds the instance on an explicit pool (entries must lie in `[−1, 1]`).
    pub fn with_pool(params: CvarParams, pool: Vec<Vec<f64>>) -> Result<Self> {
        if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
            return Err(Error::param(format!("ε = {} must lie in (0, 1)", params.epsilon)));
        }
        if !(params.alpha0 >= 0.0 && params.alpha1 >= 0.0 && params.lambda0 >= 0.0) {
            return Err(Error::param("the CVaR instance needs α₀, α₁, λ₀ ≥ 0"));
        }
        if pool.is_empty() {
            return Err(Error::param("the scenario pool must not be empty"));
        }
        for row in &pool {
            check_dim(params.n, row.len())?;
            if row.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::param("pool entries must lie in [−1, 1]"));
            }
        }
        let set = FeasibleSet::box_simplex(1.0, FloorSimplex::probability(params.n)?)?;
        let mut pool_mean = vec![0.0; params.n];
        for row in &pool {
            for (m, v) in pool_mean.iter_mut().zip(row) {
                *m += v / pool.len() as f64;
            }
        }
        let (l, m1, m2, m_star) = cvar_constants(params.n, params.alpha0, params.alpha1, params.epsilon, params.lambda0);
        let d_x = set.max_distance(&set.start_point(), Norm::L2);
        let strongly_convex = params.lambda0 > 0.0;
        let constants = ConstantSheet {
            l,
            m1,
            m2,
            m_star: Some(m_star),
            d_x,
            norm: Norm::L2,
            rho: strongly_convex.then_some(2.0),
            mu_f: strongly_convex.then_some(2.0 * params.lambda0),
        };
        constants.validate()?;
        Ok(CvarInstance {
            params,
            pool,
            pool_mean,
            set,
            constants,
        })
    }

    pub fn params(&self) -> &CvarParams {
        &self.params
    }

    pub fn pool(&self) -> &[Vec<f64>] {
        &self.pool
    }

    /// Portfolio losses `ξᵀx` over the pool for the portfolio part `x`.
    pub fn losses(&self, portfolio: &[f64]) -> Vec<f64> {
        self.pool.iter().map(|row| dot(row, portfolio)).collect()
    }

    fn exact_value(&self, x: &[f64]) -> f64 {
        pooled_value(&self.params, &self.pool, &self.pool_mean, x)
    }

    /// Certified minimizer of the exact pooled objective.
    pub fn exact_optimum(&self, tol: f64) -> Result<Optimum> {
        solve_pooled(&self.params, &self.set, &self.pool, &self.pool_mean, tol)
    }

    /// Solves the sample-average problem on `sample` and returns σ̂ at its solution.
    pub fn saa_solve(&self, sample: &[Draw], tol: f64) -> Result<SaaSolution> {
        if sample.is_empty() {
            return Err(Error::param("the sample must not be empty"));
        }
        let mut mean = vec![0.0; self.params.n];
        for row in sample {
            check_dim(self.params.n, row.len())?;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / sample.len() as f64;
            }
        }
        let opt = solve_pooled(&self.params, &self.set, sample, &mean, tol)?;
        Ok(SaaSolution::from_values(opt, |x, xi| integrand(&self.params, x, xi), sample))
    }
}

fn integrand(p: &CvarParams, x: &[f64], xi: &[f64]) -> f64 {
    let z = dot(xi, &x[1..]);
    p.alpha0 * z + p.alpha1 * (x[0] + (z - x[0]).max(0.0) / p.epsilon) + p.lambda0 * dot(x, x)
}

fn pooled_value(p: &CvarParams, pool: &[Vec<f64>], mean: &[f64], x: &[f64]) -> f64 {
    let tail: f64 = pool.iter().map(|row| (dot(row, &x[1..]) - x[0]).max(0.0)).sum::<f64>() / pool.len() as f64;
    p.alpha0 * dot(mean, &x[1..]) + p.alpha1 * (x[0] + tail / p.epsilon) + p.lambda0 * dot(x, x)
}

/// `s·ln(1 + e^{t/s})`, an upper approximation of `[t]⁺` within `s ln 2`,
/// and its derivative.
fn softplus(t: f64, s: f64) -> (f64, f64) {
    let u = t / s;
    if u > 0.0 {
        (t + s * (-u).exp().ln_1p(), 1.0 / (1.0 + (-u).exp()))
    } else {
        (s * u.exp().ln_1p(), u.exp() / (1.0 + u.exp()))
    }
}

/// Best `x₀ ∈ [−1, 1]` for a fixed portfolio, by bisection on the
/// (monotone) right derivative of the one-dimensional convex objective.
fn best_threshold(p: &CvarParams, losses: &[f64]) -> f64 {
    let count = losses.len() as f64;
    let slope = |t: f64| {
        let above = losses.iter().filter(|&&z| z > t).count() as f64;
        p.alpha1 - p.alpha1 * above / (p.epsilon * count) + 2.0 * p.lambda0 * t
    };
    if slope(-1.0) >= 0.0 {
        return -1.0;
    }
    if slope(1.0) < 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smoothing with continuation: minimize the softplus-smoothed objective for
/// geometrically decreasing smoothing levels. The smoothed objective `f_s`
/// satisfies `f_s ≤ f ≤ f_s + α₁ s ln2 / ε`, so `f_s(x) − gap_s(x)` is a
/// certified lower bound on the optimal value, while the exact objective at
/// the returned point (with `x₀` re-optimized) is an upper bound.
fn solve_pooled(p: &CvarParams, set: &FeasibleSet, pool: &[Vec<f64>], mean: &[f64], tol: f64) -> Result<Optimum> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let n = p.n;
    let count = pool.len() as f64;
    let scale = p.alpha1 / p.epsilon;
    let mut x = set.start_point();
    let mut s = 0.05;
    let mut iterations = 0;
    let mut best: Option<Optimum> = None;
    for _ in 0..40 {
        let eval = |x: &[f64], g: &mut [f64]| -> f64 {
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut tail = 0.0;
            for row in pool {
                let (v, d) = softplus(dot(row, &x[1..]) - x[0], s);
                tail += v;
                if d > 0.0 {
                    g[0] -= d;
                    for (gi, r) in g[1..].iter_mut().zip(row) {
                        *gi += d * r;
                    }
                }
            }
            for gi in g.iter_mut() {
                *gi *= scale / count;
            }
            g[0] += p.alpha1 + 2.0 * p.lambda0 * x[0];
            for i in 0..n {
                g[i + 1] += p.alpha0 * mean[i] + 2.0 * p.lambda0 * x[i + 1];
            }
            p.alpha0 * dot(mean, &x[1..]) + p.alpha1 * x[0] + scale * tail / count + p.lambda0 * dot(x, x)
        };
        let smoothing_error = scale * s * std::f64::consts::LN_2;
        let lip = scale * (n as f64 + 1.0) / (4.0 * s) + 2.0 * p.lambda0;
        let target = (0.25 * tol).max(0.5 * smoothing_error);
        let run = accelerated_descent(set, x.clone(), eval, lip.min(1e3), target, 200_000)?;
        iterations += run.iterations;
        let lower = run.value - run.gap;
        let mut candidate = run.x.clone();
        let losses: Vec<f64> = pool.iter().map(|row| dot(row, &candidate[1..])).collect();
        candidate[0] = best_threshold(p, &losses);
        let upper = pooled_value(p, pool, mean, &candidate);
        let lower = best.as_ref().map_or(lower, |b| b.lower_bound.max(lower));
        let (bx, bv) = match &best {
            Some(b) if b.value <= upper => (b.x.clone(), b.value),
            _ => (candidate, upper),
        };
        let gap = (bv - lower).max(0.0);
        best = Some(Optimum {
            x: bx,
            value: bv,
            lower_bound: lower,
            gap,
            iterations,
        });
        if gap <= tol {
            break;
        }
        x = run.x;
        s *= 0.3;
    }
    let best = best.expect("at least one stage");
    certified(best.gap, tol, best.iterations)?;
    Ok(best)
}

/// `CVaR_ε` of an equally weighted empirical distribution from the sorted
/// tail: the mean of the largest `ε` fraction of the mass, splitting the
/// boundary atom.
pub fn cvar_sorted(values: &[f64], epsilon: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let mass = epsilon * v.len() as f64;
    let whole = mass.floor() as usize;
    let mut total: f64 = v[..whole.min(v.len())].iter().sum();
    if whole < v.len() {
        total += (mass - whole as f64) * v[whole];
    }
    total / mass
}

/// `CVaR_ε` from its variational form `min_t t + E[(Z − t)⁺]/ε`, minimized
/// over the atoms (where the piecewise-linear minimum is attained).
pub fn cvar_minimization(values: &[f64], epsilon: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let count = v.len() as f64;
    // suffix[k] = Σ_{j ≥ k} v_j
    let mut suffix = vec![0.0; v.len() + 1];
    for k in (0..v.len()).rev() {
        suffix[k] = suffix[k + 1] + v[k];
    }
    let mut best = f64::INFINITY;
    for (k, &t) in v.iter().enumerate() {
        // Atoms strictly above position k contribute (v_j − t).
        let above = (v.len() - k - 1) as f64;
        let excess = suffix[k + 1] - above * t;
        best = best.min(t + excess / (epsilon * count));
    }
    best
}

impl StochasticProblem for CvarInstance {
    fn name(&self) -> &str {
        "cvar"
    }

    fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn constants(&self) -> &ConstantSheet {
        &self.constants
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        self.pool[rng.random_range(0..self.pool.len())].clone()
    }

    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dim(self.params.n, xi.len())?;
        let p = &self.params;
        let z = dot(xi, &x[1..]);
        // Zero slope at the kink z = x₀.
        let active = if z > x[0] { 1.0 / p.epsilon } else { 0.0 };
        grad[0] = p.alpha1 * (1.0 - active) + 2.0 * p.lambda0 * x[0];
        for i in 0..p.n {
            grad[i + 1] = (p.alpha0 + p.alpha1 * active) * xi[i] + 2.0 * p.lambda0 * x[i + 1];
        }
        Ok(integrand(p, x, xi))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.exact_value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(alpha0: f64, alpha1: f64, lambda0: f64) -> CvarInstance {
        gen_instance2(4, alpha0, alpha1, 0.2, lambda0, 1000, 3).unwrap()
    }

    #[test]
    fn plus_part_vanishes_at_the_threshold() {
        let inst = small(0.0, 1.0, 0.0);
        let xi = inst.pool()[0].clone();
        let x = vec![xi[0], 1.0, 0.0, 0.0, 0.0];
        let s = inst.oracle(&x, &xi).unwrap();
        assert!((s.value - x[0]).abs() < 1e-15);
        // Zero-slope selection at the kink.
        assert_eq!(s.subgradient[0], 1.0);
    }

    #[test]
    fn printed_sheet_values() {
        let (l, m1, m2, ms) = cvar_constants(41, 0.9, 0.1, 0.9, 0.0);
        let tail = 0.9 + 0.1 / 0.9;
        let radical = (0.01 * (1.0 - 1.0 / 0.9f64).powi(2) + 41.0 * tail * tail).sqrt();
        assert!((l - radical).abs() < 1e-12 && (ms - radical).abs() < 1e-12);
        assert!((m1 - 2.0 * tail).abs() < 1e-12);
        assert!((m2 - ((0.1f64 / 0.9).powi(2) + 4.0 * 41.0 * tail * tail).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cvar_forms_agree() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let values: Vec<f64> = (0..37).map(|_| rng.random_range(-1.0..1.0)).collect();
            for eps in [0.05, 0.1, 0.5, 0.9, 1.0] {
                let a = cvar_sorted(&values, eps);
                let b = cvar_minimization(&values, eps);
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn two_atom_cvar() {
        assert!((cvar_sorted(&[0.0, 1.0], 0.5) - 1.0).abs() < 1e-15);
        assert!((cvar_sorted(&[0.0, 1.0], 0.25) - 1.0).abs() < 1e-15);
        assert!((cvar_sorted(&[0.0, 1.0], 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn without_the_tail_term_the_optimum_is_a_vertex() {
        let inst = small(1.0, 0.0, 0.0);
        let opt = inst.exact_optimum(1e-6).unwrap();
        let mean = &inst.pool_mean;
        let best = mean.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((opt.value - best).abs() <= 1e-6);
    }

    #[test]
    fn exact_optimum_brackets_the_pooled_objective() {
        let inst = small(0.3, 0.7, 0.0);
        let opt = inst.exact_optimum(1e-5).unwrap();
        assert!(opt.gap <= 1e-5);
        assert!((inst.objective(&opt.x).unwrap() - opt.value).abs() < 1e-12);
        // The variational form at the optimal portfolio matches.
        let losses = inst.losses(&opt.x[1..]);
        let alt = 0.3 * dot(&inst.pool_mean, &opt.x[1..]) + 0.7 * cvar_sorted(&losses, 0.2);
        assert!(alt <= opt.value + 1e-9);
    }
}
