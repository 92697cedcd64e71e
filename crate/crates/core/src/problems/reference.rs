//! Deterministic reference solvers producing certified optima.
//!
//! Smooth objectives are minimized by accelerated projected gradient with
//! backtracking and adaptive restart; the Frank–Wolfe gap
//! `max_{v∈X} ∇f(x)ᵀ(x − v)` certifies `f(x) − f* ≤ gap`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::sets::FeasibleSet;

/// A certified approximate minimizer: `lower_bound ≤ f* ≤ value = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Certified lower bound on the optimal value.
    pub lower_bound: f64,
    /// `value − lower_bound`.
    pub gap: f64,
    pub iterations: usize,
}

/// Frank–Wolfe gap of `grad` at `x` over the set.
pub fn frank_wolfe_gap(set: &FeasibleSet, x: &[f64], grad: &[f64]) -> Result<f64> {
    let v = set.lmo(grad)?;
    Ok((dot(grad, x) - dot(grad, &v)).max(0.0))
}

/// Outcome of [`accelerated_descent`].
pub(crate) struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// FISTA with backtracking line search and gradient-based restart, stopped
/// when the Frank–Wolfe gap drops below `tol`.
///
/// `fg(x, grad)` writes the gradient and returns the objective value.
pub(crate) fn accelerated_descent<F>(
    set: &FeasibleSet,
    start: Vec<f64>,
    mut fg: F,
    lipschitz_guess: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Descent>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = start.len();
    let mut x = set.project(&start)?;
    let mut gx = vec![0.0; n];
    let mut fx = fg(&x, &mut gx);
    let mut gap = frank_wolfe_gap(set, &x, &gx)?;
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut lip = lipschitz_guess.max(1e-12);
    let mut gy = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut it = 0;
    while gap > tol && it < max_iter {
        it += 1;
        let fy = fg(&y, &mut gy);
        let (x_new, f_new) = loop {
            let trial: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect();
            let xn = set.project_unchecked(&trial);
            let d: Vec<f64> = xn.iter().zip(&y).map(|(a, b)| a - b).collect();
            let fn_ = fg(&xn, &mut g_new);
            let model = fy + dot(&gy, &d) + 0.5 * lip * dot(&d, &d);
            if fn_ <= model + 1e-14 * (1.0 + fy.abs()) || lip > 1e20 {
                break (xn, fn_);
            }
            lip *= 2.0;
        };
        // Restart the momentum when it points uphill.
        let restart = y
            .iter()
            .zip(&x_new)
            .zip(&x)
            .map(|((yi, xn), xo)| (yi - xn) * (xn - xo))
            .sum::<f64>()
            > 0.0;
        let t_new = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if restart { 0.0 } else { (t - 1.0) / t_new };
        y = x_new.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        t = t_new;
        x = x_new;
        fx = f_new;
        gx.copy_from_slice(&g_new);
        gap = frank_wolfe_gap(set, &x, &gx)?;
        lip *= 0.95;
    }
    Ok(Descent {
        x,
        value: fx,
        gap,
        iterations: it,
    })
}

/// Checks a certificate against the requested tolerance.
pub(crate) fn certified(gap: f64, tol: f64, iterations: usize) -> Result<()> {
    if gap <= tol {
        Ok(())
    } else {
        Err(Error::Convergence { iterations, gap })
    }
}
