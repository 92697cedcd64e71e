//! Dense two-phase revised simplex with Bland's rule.
//!
//! Solves small linear programs of the form
//!
//! ```text
//! min cᵀy  subject to  A_ub y ≤ b_ub,  A_eq y = b_eq,  y free
//! ```
//!
//! and returns the primal solution together with the Lagrange multipliers,
//! using the sign convention of the risk-measure duals: multipliers of
//! inequality rows are nonpositive and `A_ubᵀλ_ub + A_eqᵀλ_eq = c` at
//! optimality. The basis matrix is refactored with a dense LU at every pivot,
//! which is the cheapest robust choice for the handful of rows that the
//! second-stage problems have.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Termination status of the simplex method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration limit",
        };
        f.write_str(s)
    }
}

/// A dense linear program over free variables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

/// Primal and dual solution of a [`LinearProgram`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status` is optimal.
    pub x: Vec<f64>,
    pub value: f64,
    /// Multipliers of the equality rows.
    pub dual_eq: Vec<f64>,
    /// Multipliers of the inequality rows, all nonpositive.
    pub dual_ub: Vec<f64>,
}

/// Residuals certifying an optimal solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Largest violation of a primal constraint.
    pub primal: f64,
    /// Largest violation of dual feasibility, including the sign of `dual_ub`.
    pub dual: f64,
    /// Absolute difference between the primal and dual objective values.
    pub gap: f64,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>) -> Self {
        LinearProgram {
            c,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Adds the row `a·y ≤ b`.
    pub fn le(mut self, a: Vec<f64>, b: f64) -> Self {
        self.a_ub.push(a);
        self.b_ub.push(b);
        self
    }

    /// Adds the row `a·y = b`.
    pub fn eq(mut self, a: Vec<f64>, b: f64) -> Self {
        self.a_eq.push(a);
        self.b_eq.push(b);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        check_dim(self.a_ub.len(), self.b_ub.len())?;
        check_dim(self.a_eq.len(), self.b_eq.len())?;
        for row in self.a_ub.iter().chain(&self.a_eq) {
            check_dim(n, row.len())?;
        }
        let finite = self.c.iter().chain(&self.b_ub).chain(&self.b_eq).all(|v| v.is_finite())
            && self.a_ub.iter().chain(&self.a_eq).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("linear program data must be finite"));
        }
        Ok(())
    }

    /// Solves the program. Infeasibility and unboundedness are reported through
    /// the status, not as errors.
    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        solve_impl(self)
    }

    /// Primal, dual and gap residuals of `sol` with respect to this program.
    pub fn certificate(&self, sol: &LpSolution) -> Certificate {
        let mut primal: f64 = 0.0;
        for (row, b) in self.a_ub.iter().zip(&self.b_ub) {
            primal = primal.max(dot(row, &sol.x) - b);
        }
        for (row, b) in self.a_eq.iter().zip(&self.b_eq) {
            primal = primal.max((dot(row, &sol.x) - b).abs());
        }
        let mut dual: f64 = sol.dual_ub.iter().fold(0.0, |m, &l| m.max(l));
        for j in 0..self.c.len() {
            let mut s = -self.c[j];
            for (row, l) in self.a_ub.iter().zip(&sol.dual_ub) {
                s += row[j] * l;
            }
            for (row, l) in self.a_eq.iter().zip(&sol.dual_eq) {
                s += row[j] * l;
            }
            dual = dual.max(s.abs());
        }
        let dual_value = dot(&self.b_ub, &sol.dual_ub) + dot(&self.b_eq, &sol.dual_eq);
        Certificate {
            primal,
            dual,
            gap: (sol.value - dual_value).abs(),
        }
    }
}

/// Convenience wrapper building a [`LinearProgram`] from its parts and solving it.
pub fn lp_solve_dense(
    c: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> Result<LpSolution> {
    LinearProgram {
        c: c.to_vec(),
        a_ub: a_ub.to_vec(),
        b_ub: b_ub.to_vec(),
        a_eq: a_eq.to_vec(),
        b_eq: b_eq.to_vec(),
    }
    .solve()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const REDUCED_COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;

/// Standard form `min cᵀx, Ax = b, x ≥ 0, b ≥ 0` derived from a [`LinearProgram`].
struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<f64>,
    /// `-1` for rows multiplied by −1 to make the right-hand side nonnegative.
    row_sign: Vec<f64>,
    /// Number of structural columns (split variables plus slacks).
    structural: usize,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.c.len();
    let m_ub = lp.a_ub.len();
    let m = m_ub + lp.a_eq.len();
    // Columns: y⁺ and y⁻ interleaved, then one slack per inequality row, then
    // one artificial per row.
    let structural = 2 * n + m_ub;
    let mut a = DMatrix::zeros(m, structural + m);
    let mut b = DVector::zeros(m);
    let mut row_sign = vec![1.0; m];
    let rows = lp.a_ub.iter().zip(&lp.b_ub).chain(lp.a_eq.iter().zip(&lp.b_eq));
    for (i, (row, &rhs)) in rows.enumerate() {
        let s = if rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[i] = s;
        for j in 0..n {
            a[(i, 2 * j)] = s * row[j];
            a[(i, 2 * j + 1)] = -s * row[j];
        }
        if i < m_ub {
            a[(i, 2 * n + i)] = s;
        }
        a[(i, structural + i)] = 1.0;
        b[i] = s * rhs;
    }
    let mut c = vec![0.0; structural + m];
    for j in 0..n {
        c[2 * j] = lp.c[j];
        c[2 * j + 1] = -lp.c[j];
    }
    StandardForm {
        a,
        b,
        c,
        row_sign,
        structural,
    }
}

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Basis {
    cols: Vec<usize>,
    x: DVector<f64>,
}

fn basis_matrix(sf: &StandardForm, cols: &[usize]) -> DMatrix<f64> {
    let m = cols.len();
    DMatrix::from_fn(m, m, |i, k| sf.a[(i, cols[k])])
}

fn run_simplex(sf: &StandardForm, cost: &[f64], basis: &mut Basis, barred: &[bool]) -> Result<Phase> {
    let m = sf.a.nrows();
    let total = sf.a.ncols();
    let max_iter = 50 * (m + total) + 1000;
    for _ in 0..max_iter {
        let bm = basis_matrix(sf, &basis.cols);
        let lu = bm.clone().lu();
        let x_b = lu
            .solve(&sf.b)
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        basis.x = x_b.map(|v| if v < 0.0 && v > -1e-12 { 0.0 } else { v });
        let c_b = DVector::from_iterator(m, basis.cols.iter().map(|&j| cost[j]));
        let pi = bm
            .transpose()
            .lu()
            .solve(&c_b)
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;

        let mut in_basis = vec![false; total];
        for &j in &basis.cols {
            in_basis[j] = true;
        }
        // Bland: the lowest-index column with a negative reduced cost enters.
        let entering = (0..total).find(|&j| {
            !in_basis[j] && !barred[j] && cost[j] - sf.a.column(j).dot(&pi) < -REDUCED_COST_TOL
        });
        let Some(q) = entering else {
            return Ok(Phase::Optimal);
        };
        let d = lu
            .solve(&sf.a.column(q).into_owned())
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        // Ratio test; ties go to the basic column with the lowest index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if d[i] > PIVOT_TOL {
                let ratio = basis.x[i].max(0.0) / d[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie || tie && basis.cols[i] < basis.cols[r] {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        match leave {
            None => return Ok(Phase::Unbounded),
            Some((r, _)) => basis.cols[r] = q,
        }
    }
    Ok(Phase::IterationLimit)
}

fn solve_impl(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.c.len();
    let m_ub = lp.a_ub.len();
    let m = m_ub + lp.a_eq.len();
    let failed = |status| LpSolution {
        status,
        x: vec![0.0; n],
        value: f64::NAN,
        dual_eq: vec![0.0; lp.a_eq.len()],
        dual_ub: vec![0.0; m_ub],
    };

    if m == 0 {
        // Free variables without constraints: bounded only for c = 0.
        if lp.c.iter().any(|&c| c != 0.0) {
            return Ok(failed(LpStatus::Unbounded));
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: vec![0.0; n],
            value: 0.0,
            dual_eq: vec![],
            dual_ub: vec![],
        });
    }

    let sf = standard_form(lp);
    let total = sf.a.ncols();

    // Phase 1: minimise the sum of artificials from the artificial basis.
    let mut phase1_cost = vec![0.0; total];
    for c in phase1_cost.iter_mut().skip(sf.structural) {
        *c = 1.0;
    }
    let mut basis = Basis {
        cols: (sf.structural..total).collect(),
        x: sf.b.clone(),
    };
    let none_barred = vec![false; total];
    match run_simplex(&sf, &phase1_cost, &mut basis, &none_barred)? {
        Phase::Optimal => {}
        Phase::Unbounded => return Err(Error::Numerical("phase one reported unbounded".into())),
        Phase::IterationLimit => return Ok(failed(LpStatus::IterationLimit)),
    }
    let infeasibility: f64 = basis
        .cols
        .iter()
        .zip(basis.x.iter())
        .filter(|(&j, _)| j >= sf.structural)
        .map(|(_, &v)| v)
        .sum();
    let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Ok(failed(LpStatus::Infeasible));
    }

    // Drive remaining artificials out of the basis where a structural column
    // can replace them; rows where none can are redundant and keep theirs.
    for r in 0..m {
        if basis.cols[r] < sf.structural {
            continue;
        }
        let lu = basis_matrix(&sf, &basis.cols).lu();
        let in_basis: Vec<usize> = basis.cols.clone();
        let replacement = (0..sf.structural).find(|j| {
            !in_basis.contains(j)
                && lu
                    .solve(&sf.a.column(*j).into_owned())
                    .is_some_and(|d| d[r].abs() > 1e-9)
        });
        if let Some(j) = replacement {
            basis.cols[r] = j;
        }
    }

    // Phase 2 on the original costs with artificials barred from entering.
    let mut barred = vec![false; total];
    for b in barred.iter_mut().skip(sf.structural) {
        *b = true;
    }
    match run_simplex(&sf, &sf.c, &mut basis, &barred)? {
        Phase::Optimal => {}
        Phase::Unbounded => return Ok(failed(LpStatus::Unbounded)),
        Phase::IterationLimit => return Ok(failed(LpStatus::IterationLimit)),
    }

    let bm = basis_matrix(&sf, &basis.cols);
    let lu = bm.clone().lu();
    let x_b = lu
        .solve(&sf.b)
        .ok_or_else(|| Error::Numerical("singular final basis".into()))?;
    let c_b = DVector::from_iterator(m, basis.cols.iter().map(|&j| sf.c[j]));
    let pi = bm
        .transpose()
        .lu()
        .solve(&c_b)
        .ok_or_else(|| Error::Numerical("singular final basis".into()))?;

    let mut xs = vec![0.0; total];
    for (k, &j) in basis.cols.iter().enumerate() {
        xs[j] = x_b[k].max(0.0);
    }
    let x: Vec<f64> = (0..n).map(|j| xs[2 * j] - xs[2 * j + 1]).collect();
    let duals: Vec<f64> = (0..m).map(|i| sf.row_sign[i] * pi[i]).collect();
    let value = dot(&lp.c, &x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        dual_ub: duals[..m_ub].iter().map(|&l| l.min(0.0)).collect(),
        dual_eq: duals[m_ub..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_plus_part() {
        // min y s.t. y ≥ 0.3, y ≥ 0
        let lp = LinearProgram::new(vec![1.0]).le(vec![-1.0], -0.3).le(vec![-1.0], 0.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 0.3).abs() < 1e-12);
        assert!((sol.value - 0.3).abs() < 1e-12);
        let cert = lp.certificate(&sol);
        assert!(cert.primal < 1e-12 && cert.dual < 1e-12 && cert.gap < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let lp = LinearProgram::new(vec![1.0]).le(vec![1.0], -1.0).le(vec![-1.0], 0.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn free_direction_is_unbounded() {
        let lp = LinearProgram::new(vec![1.0, 0.0]).le(vec![0.0, 1.0], 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_get_free_multipliers() {
        // min -y1 - 2 y2 s.t. y1 + y2 = 1, y ≥ 0: optimum at (0, 1), multiplier -2.
        let lp = LinearProgram::new(vec![-1.0, -2.0])
            .eq(vec![1.0, 1.0], 1.0)
            .le(vec![-1.0, 0.0], 0.0)
            .le(vec![0.0, -1.0], 0.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value + 2.0).abs() < 1e-12);
        assert!((sol.dual_eq[0] + 2.0).abs() < 1e-12);
        let cert = lp.certificate(&sol);
        assert!(cert.gap < 1e-12 && cert.dual < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let lp = LinearProgram::new(vec![1.0, 1.0])
            .eq(vec![1.0, 1.0], 2.0)
            .eq(vec![2.0, 2.0], 4.0)
            .le(vec![-1.0, 0.0], 0.0)
            .le(vec![0.0, -1.0], 0.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!(lp.certificate(&sol).gap < 1e-10);
    }

    #[test]
    fn no_constraints() {
        assert_eq!(LinearProgram::new(vec![0.0]).solve().unwrap().status, LpStatus::Optimal);
        assert_eq!(LinearProgram::new(vec![1.0]).solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let lp = LinearProgram::new(vec![1.0, 1.0]).le(vec![1.0], 1.0);
        assert!(matches!(lp.solve(), Err(Error::Dimension { .. })));
    }
}
