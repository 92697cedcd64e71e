//! The stochastic-oracle contract every solver programs against, the analytic
//! constant sheet of a problem and the value returned by one oracle call.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Norm};
use crate::sets::FeasibleSet;

/// A realization ξ of the random data, stored explicitly so oracle calls can
/// be replayed.
pub type Draw = Vec<f64>;

/// Analytic constants of a stochastic program.
///
/// `l` bounds the dual norm of subgradients of the objective, `m1` and `m2`
/// are the light-tail scales of the oracle value and subgradient deviations,
/// `m_star` bounds the exponential moment of the stochastic subgradient norm,
/// and `d_x` is the largest distance from the designated start point in the
/// primal norm `norm`. The optional pair (`rho`, `mu_f`) records uniform
/// convexity `f(y) ≥ f(x) + f'(x)ᵀ(y−x) + (μ/2)‖y−x‖^ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSheet {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "Mstar", default, skip_serializing_if = "Option::is_none")]
    pub m_star: Option<f64>,
    #[serde(rename = "D_X")]
    pub d_x: f64,
    pub norm: Norm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_f: Option<f64>,
}

impl ConstantSheet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L", self.l), ("M1", self.m1), ("M2", self.m2), ("D_X", self.d_x)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("constant {name} = {v} must be positive")));
            }
        }
        if let Some(m) = self.m_star {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::param(format!("constant Mstar = {m} must be positive")));
            }
        }
        match (self.rho, self.mu_f) {
            (None, None) => Ok(()),
            (Some(rho), Some(mu)) if rho >= 2.0 && mu > 0.0 && mu.is_finite() => Ok(()),
            _ => Err(Error::param("uniform convexity needs rho ≥ 2 together with mu_f > 0")),
        }
    }

    pub fn m_star(&self) -> Result<f64> {
        self.m_star.ok_or(Error::MissingConstant("Mstar"))
    }

    /// The uniform-convexity pair `(ρ, μ(f))`.
    pub fn uniform_convexity(&self) -> Result<(f64, f64)> {
        match (self.rho, self.mu_f) {
            (Some(rho), Some(mu)) => Ok((rho, mu)),
            (None, _) => Err(Error::MissingConstant("rho")),
            (_, None) => Err(Error::MissingConstant("mu_f")),
        }
    }
}

/// Value and stochastic subgradient returned by one oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub value: f64,
    pub subgradient: Vec<f64>,
}

/// A stochastic convex program `min_{x∈X} E[g(x, ξ)]` with an oracle
/// returning `g(x, ξ)` and a measurable subgradient selection `G(x, ξ)`.
pub trait StochasticProblem: Send + Sync {
    /// Short identifier used in records and file names.
    fn name(&self) -> &str;

    fn set(&self) -> &FeasibleSet;

    fn constants(&self) -> &ConstantSheet;

    fn dim(&self) -> usize {
        self.set().dim()
    }

    /// Draws one realization from the problem's distribution.
    fn sample(&self, rng: &mut dyn RngCore) -> Draw;

    /// Writes `G(x, ξ)` into `grad` and returns `g(x, ξ)`, without validating
    /// the inputs. Solvers call this on points they know to be feasible.
    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Exact objective `f(x) = E[g(x, ξ)]` when it is computable.
    fn objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Validated oracle call.
    fn oracle(&self, x: &[f64], xi: &[f64]) -> Result<OracleSample> {
        self.set().check_member(x)?;
        let mut subgradient = vec![0.0; x.len()];
        let value = self.eval_into(x, xi, &mut subgradient)?;
        if !value.is_finite() || !all_finite(&subgradient) {
            return Err(Error::Numerical("oracle returned a non-finite value".into()));
        }
        check_dim(x.len(), subgradient.len())?;
        Ok(OracleSample { value, subgradient })
    }
}

impl<P: StochasticProblem + ?Sized> StochasticProblem for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn set(&self) -> &FeasibleSet {
        (**self).set()
    }
    fn constants(&self) -> &ConstantSheet {
        (**self).constants()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        (**self).sample(rng)
    }
    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).eval_into(x, xi, grad)
    }
    fn objective(&self, x: &[f64]) -> Option<f64> {
        (**self).objective(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sheet() -> ConstantSheet {
        ConstantSheet {
            l: 1.0,
            m1: 0.65,
            m2: 1.1,
            m_star: Some(1.0),
            d_x: 2.0,
            norm: Norm::L1,
            rho: None,
            mu_f: None,
        }
    }

    #[test]
    fn sheet_validation() {
        assert!(sheet().validate().is_ok());
        let mut s = sheet();
        s.rho = Some(2.0);
        assert!(s.validate().is_err());
        s.mu_f = Some(0.5);
        assert!(s.validate().is_ok());
        s.rho = Some(1.5);
        assert!(s.validate().is_err());
        let mut s = sheet();
        s.l = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sheet_json_uses_conventional_symbols() {
        let json = serde_json::to_string(&sheet()).unwrap();
        assert!(json.contains("\"L\":1.0") && json.contains("\"Mstar\"") && json.contains("\"D_X\""));
        let back: ConstantSheet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sheet());
    }
}
