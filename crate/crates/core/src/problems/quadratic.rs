//! Quadratic instance on a floor simplex with Bernoulli data:
//!
//! `f(x) = E[α₀ξᵀx + (α₁/2)((ξᵀx)² + λ₀‖x‖₂²)]`, `ξᵢ ∈ {−1, +1}` independent
//! with `P(ξᵢ = 1) = Ψᵢ`, so that `f(x) = α₀μᵀx + (α₁/2)(xᵀVx + λ₀‖x‖₂²)` with
//! `μᵢ = 2Ψᵢ − 1`, `Vᵢᵢ = 1` and `Vᵢⱼ = μᵢμⱼ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::reference::{accelerated_descent, certified, frank_wolfe_gap, Optimum};
use super::SaaSolution;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Norm};
use crate::problem::{ConstantSheet, Draw, StochasticProblem};
use crate::seeds::rng_from_seed;
use crate::sets::{FeasibleSet, FloorSimplex};

/// Parameters of the quadratic instance; together with the seed they fully
/// determine the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticParams {
    pub n: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub lambda0: f64,
    /// Simplex mass.
    pub a: f64,
    /// Simplex floor.
    pub b: f64,
    /// Norm in which the constant sheet is expressed.
    pub norm: Norm,
    pub seed: u64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams {
            n: 40,
            alpha0: 0.1,
            alpha1: 0.9,
            lambda0: 0.0,
            a: 1.0,
            b: 0.0,
            norm: Norm::L1,
            seed: 0,
        }
    }
}

/// A generated quadratic instance.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    params: QuadraticParams,
    psi: Vec<f64>,
    mu: Vec<f64>,
    set: FeasibleSet,
    constants: ConstantSheet,
    lambda_min_v: f64,
}

/// Generates the instance with `Ψᵢ` drawn uniformly on `[0, 1]` from the seed.
#[allow(clippy::too_many_arguments)]
pub fn gen_instance1(
    n: usize,
    alpha0: f64,
    alpha1: f64,
    lambda0: f64,
    a: f64,
    b: f64,
    norm: Norm,
    seed: u64,
) -> Result<QuadraticInstance> {
    QuadraticInstance::generate(QuadraticParams {
        n,
        alpha0,
        alpha1,
        lambda0,
        a,
        b,
        norm,
        seed,
    })
}

impl QuadraticInstance {
    pub fn generate(params: QuadraticParams) -> Result<Self> {
        let mut rng = rng_from_seed(params.seed);
        let psi: Vec<f64> = (0..params.n).map(|_| rng.random::<f64>()).collect();
        Self::with_psi(params, psi)
    }

    /// Builds the instance from explicit probabilities `Ψ`.
    pub fn with_psi(params: QuadraticParams, psi: Vec<f64>) -> Result<Self> {
        check_dim(params.n, psi.len())?;
        if psi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param("probabilities Ψ must lie in [0, 1]"));
        }
        if !(params.alpha1 >= 0.0 && params.lambda0 >= 0.0 && params.alpha0.is_finite()) {
            return Err(Error::param("the quadratic instance needs α₁ ≥ 0 and λ₀ ≥ 0"));
        }
        if params.norm == Norm::Linf {
            return Err(Error::param("constant sheets are available for the ℓ₁ and ℓ₂ norms"));
        }
        let simplex = FloorSimplex::new(params.n, params.a, params.b)?;
        let set = FeasibleSet::Simplex(simplex);
        let mu: Vec<f64> = psi.iter().map(|p| 2.0 * p - 1.0).collect();
        let lambda_min_v = v_matrix(&mu).symmetric_eigenvalues().min();
        let constants = quadratic_constants(&params, lambda_min_v, &set);
        constants.validate()?;
        Ok(QuadraticInstance {
            params,
            psi,
            mu,
            set,
            constants,
            lambda_min_v,
        })
    }

    pub fn params(&self) -> &QuadraticParams {
        &self.params
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Mean of the data, `μᵢ = 2Ψᵢ − 1`.
    pub fn mean(&self) -> &[f64] {
        &self.mu
    }

    /// Second-moment matrix `V = E[ξξᵀ]`.
    pub fn v(&self) -> DMatrix<f64> {
        v_matrix(&self.mu)
    }

    pub fn lambda_min_v(&self) -> f64 {
        self.lambda_min_v
    }

    /// Replaces the constant sheet, for experiments that prescribe their own constants.
    pub fn with_constants(mut self, constants: ConstantSheet) -> Result<Self> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    /// Exact gradient `α₀μ + α₁(V + λ₀I)x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mx = dot(&self.mu, x);
        (0..x.len())
            .map(|i| {
                let vx = self.mu[i] * mx + (1.0 - self.mu[i] * self.mu[i]) * x[i];
                p.alpha0 * self.mu[i] + p.alpha1 * (vx + p.lambda0 * x[i])
            })
            .collect()
    }

    fn exact_value(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        let mx = dot(&self.mu, x);
        let xvx = mx * mx + x.iter().zip(&self.mu).map(|(xi, m)| (1.0 - m * m) * xi * xi).sum::<f64>();
        p.alpha0 * mx + 0.5 * p.alpha1 * (xvx + p.lambda0 * dot(x, x))
    }

    /// Certified minimizer of the exact objective.
    pub fn exact_optimum(&self, tol: f64) -> Result<Optimum> {
        let p = &self.params;
        let mut q_mat = self.v();
        for i in 0..p.n {
            q_mat[(i, i)] += p.lambda0;
        }
        q_mat *= p.alpha1;
        let q: Vec<f64> = self.mu.iter().map(|m| p.alpha0 * m).collect();
        solve_simplex_qp(&self.set, &q_mat, &q, tol)
    }

    /// Solves the sample-average problem and returns σ̂ of the oracle values at
    /// its solution.
    pub fn saa_solve(&self, sample: &[Draw], tol: f64) -> Result<SaaSolution> {
        if sample.is_empty() {
            return Err(Error::param("the sample must not be empty"));
        }
        let p = &self.params;
        let n = p.n;
        let big_n = sample.len() as f64;
        let mut s = DMatrix::<f64>::zeros(n, n);
        let mut mean = vec![0.0; n];
        for xi in sample {
            check_dim(n, xi.len())?;
            let v = DVector::from_column_slice(xi);
            s.ger(1.0 / big_n, &v, &v, 1.0);
            for (m, x) in mean.iter_mut().zip(xi) {
                *m += x / big_n;
            }
        }
        for i in 0..n {
            s[(i, i)] += p.lambda0;
        }
        s *= p.alpha1;
        let q: Vec<f64> = mean.iter().map(|m| p.alpha0 * m).collect();
        let opt = solve_simplex_qp(&self.set, &s, &q, tol)?;
        Ok(SaaSolution::from_values(opt, |x, xi| self.value_at(x, xi), sample))
    }

    fn value_at(&self, x: &[f64], xi: &[f64]) -> f64 {
        let p = &self.params;
        let s = dot(xi, x);
        p.alpha0 * s + 0.5 * p.alpha1 * (s * s + p.lambda0 * dot(x, x))
    }
}

fn v_matrix(mu: &[f64]) -> DMatrix<f64> {
    let n = mu.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { mu[i] * mu[j] })
}

fn quadratic_constants(p: &QuadraticParams, lambda_min_v: f64, set: &FeasibleSet) -> ConstantSheet {
    let a0 = p.alpha0.abs();
    let a1 = p.alpha1;
    let n = p.n as f64;
    let start = set.start_point();
    let d_x = set.max_distance(&start, p.norm);
    let curvature = a1 * (lambda_min_v + p.lambda0);
    let (l, m2, mu_f) = match p.norm {
        Norm::L1 => (a0 + a1 * (1.0 + p.lambda0) * p.a, 2.0 * a0 + a1 * p.a, curvature / n),
        _ => (
            (a0 + a1 * (1.0 + p.lambda0) * p.a) * n.sqrt(),
            (2.0 * a0 + 2.0 * a1 * p.a) * n.sqrt(),
            curvature,
        ),
    };
    let strongly_convex = mu_f > 1e-12;
    ConstantSheet {
        l,
        m1: 2.0 * a0 * p.a + 0.5 * a1 * p.a * p.a,
        m2,
        m_star: Some(l),
        d_x,
        norm: p.norm,
        rho: strongly_convex.then_some(2.0),
        mu_f: strongly_convex.then_some(mu_f),
    }
}

/// Minimizes `qᵀx + ½xᵀQx` over a floor simplex: accelerated projected
/// gradient followed by an exact solve of the optimality system on the
/// detected support.
pub(crate) fn solve_simplex_qp(set: &FeasibleSet, q_mat: &DMatrix<f64>, q: &[f64], tol: f64) -> Result<Optimum> {
    let simplex = set.as_simplex().ok_or_else(|| Error::unsupported("quadratic solver needs a simplex"))?;
    let n = q.len();
    let eval = |x: &[f64], g: &mut [f64]| -> f64 {
        let xv = DVector::from_column_slice(x);
        let qx = q_mat * &xv;
        for i in 0..n {
            g[i] = q[i] + qx[i];
        }
        dot(q, x) + 0.5 * xv.dot(&qx)
    };
    let lip = (0..n)
        .map(|i| q_mat.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(1e-12, f64::max);
    let mut start = set.start_point();
    let mut iterations = 0;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut inner_tol = tol.max(1e-7);
    for _ in 0..6 {
        let run = accelerated_descent(set, start.clone(), eval, lip, inner_tol, 200_000)?;
        iterations += run.iterations;
        let mut candidate = (run.x.clone(), run.value, run.gap);
        if let Some(xp) = polish_support(simplex, q_mat, q, &run.x) {
            let mut g = vec![0.0; n];
            let fp = eval(&xp, &mut g);
            let gp = frank_wolfe_gap(set, &xp, &g)?;
            if gp < candidate.2 {
                candidate = (xp, fp, gp);
            }
        }
        let better = best.as_ref().map_or(true, |b| candidate.2 < b.2);
        if better {
            best = Some(candidate);
        }
        let (bx, _, bg) = best.as_ref().expect("set above");
        if *bg <= tol {
            break;
        }
        start = bx.clone();
        inner_tol = (inner_tol * 0.01).max(tol);
    }
    let (x, value, gap) = best.expect("at least one pass");
    certified(gap, tol, iterations)?;
    Ok(Optimum {
        x,
        value,
        lower_bound: value - gap,
        gap,
        iterations,
    })
}

/// Solves the equality-constrained problem on the coordinates strictly above
/// the floor; returns `None` if the result leaves the set.
fn polish_support(simplex: &FloorSimplex, q_mat: &DMatrix<f64>, q: &[f64], x: &[f64]) -> Option<Vec<f64>> {
    let b = simplex.floor();
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > b + 1e-9).collect();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let off: Vec<usize> = (0..x.len()).filter(|i| !support.contains(i)).collect();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            m[(r, c)] = q_mat[(i, j)];
        }
        m[(r, k)] = -1.0;
        m[(k, r)] = 1.0;
        rhs[r] = -q[i] - b * off.iter().map(|&j| q_mat[(i, j)]).sum::<f64>();
    }
    rhs[k] = simplex.mass() - b * off.len() as f64;
    let sol = m.lu().solve(&rhs)?;
    let mut out = vec![b; x.len()];
    for (r, &i) in support.iter().enumerate() {
        if !(sol[r] >= b) || !sol[r].is_finite() {
            return None;
        }
        out[i] = sol[r];
    }
    Some(out)
}

impl StochasticProblem for QuadraticInstance {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn constants(&self) -> &ConstantSheet {
        &self.constants
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        self.psi
            .iter()
            .map(|&p| if rng.random::<f64>() < p { 1.0 } else { -1.0 })
            .collect()
    }

    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dim(self.params.n, xi.len())?;
        let p = &self.params;
        let s = dot(xi, x);
        for i in 0..x.len() {
            grad[i] = p.alpha0 * xi[i] + p.alpha1 * (s * xi[i] + p.lambda0 * x[i]);
        }
        Ok(p.alpha0 * s + 0.5 * p.alpha1 * (s * s + p.lambda0 * dot(x, x)))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.exact_value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> QuadraticParams {
        QuadraticParams {
            n,
            ..Default::default()
        }
    }

    #[test]
    fn hand_evaluated_oracle() {
        let inst = QuadraticInstance::with_psi(params(4), vec![0.5; 4]).unwrap();
        let x = vec![0.25; 4];
        let s = inst.oracle(&x, &[1.0; 4]).unwrap();
        assert!((s.value - 0.55).abs() < 1e-15);
    }

    #[test]
    fn l1_sheet_matches_the_printed_constants() {
        let inst = gen_instance1(40, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 1).unwrap();
        let c = inst.constants();
        assert!((c.l - 1.0).abs() < 1e-15);
        assert!((c.m1 - 0.65).abs() < 1e-15);
        assert!((c.m2 - 1.1).abs() < 1e-15);
        assert_eq!(c.m_star, Some(c.l));
    }

    #[test]
    fn l2_sheet_for_the_multistep_experiment() {
        let inst = gen_instance1(100, 0.1, 0.9, 4.0, 1.0, 0.0, Norm::L2, 1).unwrap();
        let c = inst.constants();
        assert!((c.l * c.l + c.m2 * c.m2 - 2516.0).abs() < 1e-9);
        assert_eq!(c.rho, Some(2.0));
        assert!(c.mu_f.unwrap() >= 0.9 * 4.0);
    }

    #[test]
    fn degenerate_probabilities_give_a_zero_variance_oracle() {
        let inst = QuadraticInstance::with_psi(params(3), vec![1.0; 3]).unwrap();
        let mut rng = rng_from_seed(0);
        for _ in 0..10 {
            assert_eq!(inst.sample(&mut rng), vec![1.0; 3]);
        }
    }

    #[test]
    fn hand_assembled_objective() {
        let p = QuadraticParams {
            n: 3,
            alpha0: 0.0,
            alpha1: 2.0,
            ..Default::default()
        };
        let inst = QuadraticInstance::with_psi(p, vec![1.0, 0.5, 0.5]).unwrap();
        // μ = (1, 0, 0): V = I, so f(x) = xᵀx = 1/3 at the barycenter.
        let x = vec![1.0 / 3.0; 3];
        assert!((inst.objective(&x).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_objective_is_constant_on_the_simplex() {
        let p = QuadraticParams {
            n: 5,
            alpha0: 1.0,
            alpha1: 0.0,
            ..Default::default()
        };
        let inst = QuadraticInstance::with_psi(p, vec![1.0; 5]).unwrap();
        let opt = inst.exact_optimum(1e-8).unwrap();
        assert!((opt.value - 1.0).abs() < 1e-12);
        assert!(opt.gap <= 1e-8);
    }

    #[test]
    fn exact_optimum_is_certified() {
        let inst = gen_instance1(40, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 5).unwrap();
        let opt = inst.exact_optimum(1e-8).unwrap();
        assert!(opt.gap <= 1e-8);
        assert!(inst.set().contains(&opt.x, 1e-12));
        assert!((inst.objective(&opt.x).unwrap() - opt.value).abs() < 1e-12);
    }

    #[test]
    fn single_draw_saa() {
        let inst = gen_instance1(6, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 2).unwrap();
        let mut rng = rng_from_seed(9);
        let sample = vec![inst.sample(&mut rng)];
        let saa = inst.saa_solve(&sample, 1e-8).unwrap();
        assert!(saa.gap <= 1e-8);
        assert!(saa.sigma < 1e-15);
    }
}
