//! The risk-neutral reformulation on the lifted variable `(y₁, x)` and a
//! linear loss on a finite scenario pool to feed it.

use rand::{Rng, RngCore};

use super::model::Eprm;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Norm};
use crate::problem::{ConstantSheet, Draw, StochasticProblem};
use crate::problems::CvarInstance;
use crate::sets::{FeasibleSet, FloorSimplex};

/// The loss `g(x, ξ) = ξᵀx` with `ξ` uniform on a finite pool.
#[derive(Debug, Clone)]
pub struct LinearLoss {
    name: String,
    set: FeasibleSet,
    pool: Vec<Vec<f64>>,
    constants: ConstantSheet,
}

impl LinearLoss {
    /// Builds the loss and its constant sheet in `norm`. Since the data are
    /// bounded, the sheet uses sup bounds: `L = ‖Eξ‖*`,
    /// `M₂ = max ‖ξ − Eξ‖*`, `M₁ = max_{ξ, x∈X} |(ξ − Eξ)ᵀx|` and
    /// `M* = max ‖ξ‖*`.
    pub fn new(set: FeasibleSet, pool: Vec<Vec<f64>>, norm: Norm) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::param("the scenario pool must not be empty"));
        }
        let n = set.dim();
        for row in &pool {
            check_dim(n, row.len())?;
        }
        let mut mean = vec![0.0; n];
        for row in &pool {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / pool.len() as f64;
            }
        }
        let dual = norm.dual();
        let (mut m1, mut m2, mut m_star): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for row in &pool {
            let dev: Vec<f64> = row.iter().zip(&mean).map(|(a, b)| a - b).collect();
            let lo = dot(&dev, &set.lmo(&dev)?);
            let neg: Vec<f64> = dev.iter().map(|v| -v).collect();
            let hi = dot(&dev, &set.lmo(&neg)?);
            m1 = m1.max(lo.abs()).max(hi.abs());
            m2 = m2.max(dual.of(&dev));
            m_star = m_star.max(dual.of(row));
        }
        let tiny = 1e-12;
        let constants = ConstantSheet {
            l: dual.of(&mean).max(tiny),
            m1: m1.max(tiny),
            m2: m2.max(tiny),
            m_star: Some(m_star.max(tiny)),
            d_x: set.max_distance(&set.start_point(), norm),
            norm,
            rho: None,
            mu_f: None,
        };
        constants.validate()?;
        Ok(LinearLoss {
            name: "linear_loss".into(),
            set,
            pool,
            constants,
        })
    }

    /// The portfolio loss of a CVaR instance: its pool on the probability
    /// simplex, with the Euclidean sheet.
    pub fn from_cvar(instance: &CvarInstance) -> Result<Self> {
        let n = instance.params().n;
        Self::new(
            FeasibleSet::Simplex(FloorSimplex::probability(n)?),
            instance.pool().to_vec(),
            Norm::L2,
        )
    }

    pub fn pool(&self) -> &[Vec<f64>] {
        &self.pool
    }
}

impl StochasticProblem for LinearLoss {
    fn name(&self) -> &str {
        &self.name
    }

    fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn constants(&self) -> &ConstantSheet {
        &self.constants
    }

    /// Same stream consumption as the CVaR instances: one uniform index.
    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        self.pool[rng.random_range(0..self.pool.len())].clone()
    }

    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dim(x.len(), xi.len())?;
        grad.copy_from_slice(xi);
        Ok(dot(xi, x))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.pool.iter().map(|row| dot(row, x)).sum::<f64>() / self.pool.len() as f64)
    }
}

/// `min_{(y₁,x) ∈ Y₁×X} c₁ᵀy₁ + E[Q(y₁, g(x, ξ))]` as a stochastic program.
///
/// Its oracle solves the second stage at `z = g(x, ξ)` and returns the
/// stacked subgradient `(c₁ − B₂₁ᵀλ₁ ; (λ₁ᵀk₂)·G(x, ξ))`. The constant sheet
/// is a conservative assembly from the probed dual ranges and the inner
/// sheet, in the inner sheet's norm.
#[derive(Debug, Clone)]
pub struct LiftedProblem<P> {
    eprm: Eprm,
    inner: P,
    name: String,
    set: FeasibleSet,
    constants: ConstantSheet,
}

/// Builds the lifted problem of a checked model and an inner program.
pub fn eprm_reformulate<P: StochasticProblem>(eprm: Eprm, inner: P) -> Result<LiftedProblem<P>> {
    LiftedProblem::new(eprm, inner)
}

impl<P: StochasticProblem> LiftedProblem<P> {
    pub fn new(eprm: Eprm, inner: P) -> Result<Self> {
        let set = match eprm.first_stage() {
            None => inner.set().clone(),
            Some(y1) => FeasibleSet::Product {
                blocks: vec![y1.clone(), inner.set().clone()],
            },
        };
        let sheet = inner.constants();
        let norm = sheet.norm;
        let report = eprm.report();
        let model = eprm.model();
        // Coordinate bounds on c₁ − B₂₁ᵀλ₁ over the dual set.
        let first: Vec<f64> = model
            .c1
            .iter()
            .zip(&report.b21_bound)
            .map(|(c, b)| c.abs() + b)
            .collect();
        let ly = norm.dual().of(&first);
        let kappa = report.k2_weight.1;
        let g_bound = sheet.m_star.unwrap_or(sheet.l + sheet.m2);
        let tiny = 1e-12;
        let constants = ConstantSheet {
            l: (ly + kappa * sheet.l).max(tiny),
            m1: (2.0 * kappa * sheet.m1).max(tiny),
            m2: (2.0 * ly + 2.0 * kappa * (sheet.l + sheet.m2)).max(tiny),
            m_star: Some((ly + kappa * g_bound).max(tiny)),
            d_x: set.max_distance(&set.start_point(), norm),
            norm,
            rho: None,
            mu_f: None,
        };
        constants.validate()?;
        Ok(LiftedProblem {
            name: format!("eprm_{}", inner.name()),
            eprm,
            inner,
            set,
            constants,
        })
    }

    pub fn eprm(&self) -> &Eprm {
        &self.eprm
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    /// Number of leading first-stage coordinates.
    pub fn first_stage_dim(&self) -> usize {
        self.eprm.model().dims.y1
    }
}

impl<P: StochasticProblem> StochasticProblem for LiftedProblem<P> {
    fn name(&self) -> &str {
        &self.name
    }

    fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn constants(&self) -> &ConstantSheet {
        &self.constants
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        self.inner.sample(rng)
    }

    fn eval_into(&self, x: &[f64], xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        let k1 = self.first_stage_dim();
        check_dim(self.set.dim(), x.len())?;
        let (y1, inner_x) = x.split_at(k1);
        let (g_first, g_inner) = grad.split_at_mut(k1);
        let z = self.inner.eval_into(inner_x, xi, g_inner)?;
        let ss = self.eprm.second_stage(y1, z)?;
        let model = self.eprm.model();
        let weight = dot(&ss.lambda1, &model.k2);
        g_first.copy_from_slice(&self.eprm.first_stage_grad(&ss.lambda1));
        g_inner.iter_mut().for_each(|g| *g *= weight);
        Ok(dot(&model.c1, y1) + ss.value)
    }
}
