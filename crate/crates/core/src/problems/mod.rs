//! The benchmark instance families with their constant sheets, exact
//! objectives and reference solvers.

pub mod cvar;
pub mod quadratic;
pub mod reference;

use serde::{Deserialize, Serialize};

pub use cvar::{cvar_minimization, cvar_sorted, gen_instance2, CvarInstance, CvarParams};
pub use quadratic::{gen_instance1, QuadraticInstance, QuadraticParams};
pub use reference::{frank_wolfe_gap, Optimum};

use crate::problem::Draw;

/// Solution of a sample-average problem with the empirical standard
/// deviation `σ̂ = √((1/N) Σ (g(x̂, ξ_t) − f̂)²)` of the oracle values at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaSolution {
    pub x: Vec<f64>,
    /// Optimal value `f̂` of the sample-average problem.
    pub value: f64,
    pub sigma: f64,
    /// Certified optimality gap of `x` for the sample-average problem.
    pub gap: f64,
    /// Oracle values `g(x̂, ξ_t)` over the sample.
    pub values: Vec<f64>,
}

impl SaaSolution {
    pub(crate) fn from_values<F>(opt: Optimum, value_at: F, sample: &[Draw]) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        let values: Vec<f64> = sample.iter().map(|xi| value_at(&opt.x, xi)).collect();
        let n = values.len() as f64;
        let var = values.iter().map(|v| (v - opt.value).powi(2)).sum::<f64>() / n;
        SaaSolution {
            x: opt.x,
            value: opt.value,
            sigma: var.sqrt(),
            gap: opt.gap,
            values,
        }
    }
}

/// A problem whose optimum and sample-average problems can be solved exactly.
pub trait ReferenceSolvable {
    /// Certified minimizer of the exact objective, `f(x*) − f* ≤ tol`.
    fn exact_optimum(&self, tol: f64) -> crate::Result<Optimum>;

    /// Certified minimizer of the sample-average objective.
    fn saa_solve(&self, sample: &[Draw], tol: f64) -> crate::Result<SaaSolution>;
}

impl ReferenceSolvable for QuadraticInstance {
    fn exact_optimum(&self, tol: f64) -> crate::Result<Optimum> {
        QuadraticInstance::exact_optimum(self, tol)
    }
    fn saa_solve(&self, sample: &[Draw], tol: f64) -> crate::Result<SaaSolution> {
        QuadraticInstance::saa_solve(self, sample, tol)
    }
}

impl ReferenceSolvable for CvarInstance {
    fn exact_optimum(&self, tol: f64) -> crate::Result<Optimum> {
        CvarInstance::exact_optimum(self, tol)
    }
    fn saa_solve(&self, sample: &[Draw], tol: f64) -> crate::Result<SaaSolution> {
        CvarInstance::saa_solve(self, sample, tol)
    }
}
