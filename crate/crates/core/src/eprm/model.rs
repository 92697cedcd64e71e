//! The two-stage representation, its assumption probes, second-stage
//! evaluation with dual certificates and the risk value of a finite
//! distribution.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::lp::{Certificate, LinearProgram, LpStatus};
use crate::sets::{BoxSet, FeasibleSet, Polytope};

/// Tolerance of the nonnegative-weight check `min_D λ₁ᵀk₂ ≥ −tol`.
const NONNEGATIVITY_TOL: f64 = 1e-9;
/// Relative slack defining the optimal dual face in the tie-break program.
const FACE_SLACK: f64 = 1e-12;
/// Relative optimality gap at which the outer cutting-plane loop stops.
const EVALUATE_TOL: f64 = 1e-9;
const EVALUATE_MAX_ITER: usize = 2000;

/// Dimensions of a model: `y1` first-stage variables, `y2` second-stage
/// variables and `coupling` rows of `B₂₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EprmDims {
    pub y1: usize,
    pub y2: usize,
    pub coupling: usize,
}

/// Data of an extended polyhedral risk measure. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprmModel {
    pub dims: EprmDims,
    /// `A₁` (m₁ × k₁) and `a₁`: the first-stage polytope `Y₁`.
    #[serde(rename = "A1")]
    pub a1_mat: Vec<Vec<f64>>,
    pub a1: Vec<f64>,
    /// `A₂` (m₂ × k₂) and `a₂`: the second-stage inequalities.
    #[serde(rename = "A2")]
    pub a2_mat: Vec<Vec<f64>>,
    pub a2: Vec<f64>,
    /// `B₂₀` (n₂₂ × k₂).
    #[serde(rename = "B20")]
    pub b20: Vec<Vec<f64>>,
    /// `B₂₁` (n₂₂ × k₁).
    #[serde(rename = "B21")]
    pub b21: Vec<Vec<f64>>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    /// Slope of the affine right-hand side `K(z) = z·k₂ + k̃₂`.
    pub k2: Vec<f64>,
    pub k2_tilde: Vec<f64>,
}

impl EprmModel {
    /// Checks that all matrix and vector shapes agree with `dims`.
    pub fn validate_dims(&self) -> Result<()> {
        let EprmDims { y1, y2, coupling } = self.dims;
        check_dim(self.a1_mat.len(), self.a1.len())?;
        for row in &self.a1_mat {
            check_dim(y1, row.len())?;
        }
        check_dim(self.a2_mat.len(), self.a2.len())?;
        for row in &self.a2_mat {
            check_dim(y2, row.len())?;
        }
        check_dim(coupling, self.b20.len())?;
        check_dim(coupling, self.b21.len())?;
        for row in &self.b20 {
            check_dim(y2, row.len())?;
        }
        for row in &self.b21 {
            check_dim(y1, row.len())?;
        }
        check_dim(y1, self.c1.len())?;
        check_dim(y2, self.c2.len())?;
        check_dim(coupling, self.k2.len())?;
        check_dim(coupling, self.k2_tilde.len())?;
        let finite = [&self.a1, &self.a2, &self.c1, &self.c2, &self.k2, &self.k2_tilde]
            .into_iter()
            .flatten()
            .chain(self.a1_mat.iter().chain(&self.a2_mat).chain(&self.b20).chain(&self.b21).flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("model data must be finite"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: EprmModel = serde_json::from_str(text)?;
        model.validate_dims()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// CVaR at level `ε` with the first-stage variable confined to `[−1, 1]`.
///
/// The representation is exact for distributions supported in `[−1, 1]`,
/// where the value-at-risk lies.
pub fn cvar_as_eprm(epsilon: f64) -> Result<EprmModel> {
    cvar_as_eprm_bounded(epsilon, 1.0)
}

/// CVaR at level `ε` with the first-stage variable confined to `[−r, r]`:
/// `min y₁ + (1/ε)E[u]` with `u − w = z − y₁`, `u, w ≥ 0`.
pub fn cvar_as_eprm_bounded(epsilon: f64, radius: f64) -> Result<EprmModel> {
    mixed_model(0.0, 1.0, epsilon, radius, false)
}

/// The combination `α₀E[Z] + α₁CVaR_ε(Z)`, carried by a pass-through
/// variable `v = z` next to the CVaR recourse `(u, w)`.
pub fn mean_cvar_as_eprm(alpha0: f64, alpha1: f64, epsilon: f64, radius: f64) -> Result<EprmModel> {
    mixed_model(alpha0, alpha1, epsilon, radius, true)
}

fn mixed_model(alpha0: f64, alpha1: f64, epsilon: f64, radius: f64, with_mean: bool) -> Result<EprmModel> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("radius {radius} must be positive")));
    }
    if !(alpha0.is_finite() && alpha1.is_finite()) {
        return Err(Error::param("weights must be finite"));
    }
    let (y2, b20, b21, c2, k2, a2_mat) = if with_mean {
        (
            3,
            vec![vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![1.0], vec![0.0]],
            vec![alpha1 / epsilon, 0.0, alpha0],
            vec![1.0, 1.0],
            vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]],
        )
    } else {
        (
            2,
            vec![vec![1.0, -1.0]],
            vec![vec![1.0]],
            vec![alpha1 / epsilon, 0.0],
            vec![1.0],
            vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
        )
    };
    let coupling = b20.len();
    Ok(EprmModel {
        dims: EprmDims { y1: 1, y2, coupling },
        a1_mat: vec![vec![1.0], vec![-1.0]],
        a1: vec![radius, radius],
        a2: vec![0.0; a2_mat.len()],
        a2_mat,
        b20,
        b21,
        c1: vec![alpha1],
        c2,
        k2,
        k2_tilde: vec![0.0; coupling],
    })
}

/// The expectation: no first stage and the pass-through `y₂ = z`.
pub fn expectation_as_eprm() -> EprmModel {
    EprmModel {
        dims: EprmDims {
            y1: 0,
            y2: 1,
            coupling: 1,
        },
        a1_mat: vec![],
        a1: vec![],
        a2_mat: vec![],
        a2: vec![],
        b20: vec![vec![1.0]],
        b21: vec![vec![]],
        c1: vec![],
        c2: vec![1.0],
        k2: vec![1.0],
        k2_tilde: vec![0.0],
    }
}

/// Quantities probed by linear programming over the dual set `D` when a
/// model is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Coordinate ranges of `λ₁` over `D`.
    pub lambda1_range: Vec<(f64, f64)>,
    /// Lower bounds of `λ₂` over `D` (its upper bounds are zero).
    pub lambda2_min: Vec<f64>,
    /// Range of `λ₁ᵀk₂` over `D`; the lower end is nonnegative.
    pub k2_weight: (f64, f64),
    /// `max_D |(B₂₁ᵀλ₁)ⱼ|` for every first-stage coordinate `j`.
    pub b21_bound: Vec<f64>,
}

/// How a dual solution is selected when the dual optimum is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Whatever vertex the simplex method returns.
    Simplex,
    /// The optimal dual point with the smallest `‖λ₁‖₁`. For CVaR this is the
    /// zero-slope selection at the kink `z = y₁`.
    MinLambda1,
}

/// A certified second-stage solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondStage {
    pub value: f64,
    pub y2: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub certificate: Certificate,
}

/// Risk value of a finite distribution with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprmValue {
    /// Objective at the best first-stage point found.
    pub value: f64,
    /// Cutting-plane lower bound on the risk value.
    pub lower_bound: f64,
    pub y1: Vec<f64>,
    pub iterations: usize,
}

/// A model that passed its assumption checks, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Eprm {
    model: EprmModel,
    y1_set: Option<FeasibleSet>,
    report: AssumptionReport,
}

fn assumption(name: &'static str, detail: impl Into<String>) -> Error {
    Error::Assumption {
        assumption: name,
        detail: detail.into(),
    }
}

fn unit(n: usize, i: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = s;
    v
}

/// `Mᵀv` for a row-major `M` with `cols` columns.
fn transpose_mul(m: &[Vec<f64>], v: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, s) in m.iter().zip(v) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * s;
        }
    }
    out
}

impl Eprm {
    /// Validates shapes and runs the assumption probes:
    /// `Y₁` nonempty and bounded, complete recourse, `D` nonempty and bounded,
    /// and `λ₁ᵀk₂ ≥ 0` on `D`.
    pub fn new(model: EprmModel) -> Result<Self> {
        model.validate_dims()?;
        let y1_set = Self::first_stage_set(&model)?;
        let mut eprm = Eprm {
            model,
            y1_set,
            report: AssumptionReport {
                lambda1_range: vec![],
                lambda2_min: vec![],
                k2_weight: (0.0, 0.0),
                b21_bound: vec![],
            },
        };
        eprm.check_recourse()?;
        eprm.report = eprm.probe_dual_set()?;
        Ok(eprm)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(EprmModel::from_json(text)?)
    }

    pub fn model(&self) -> &EprmModel {
        &self.model
    }

    pub fn report(&self) -> &AssumptionReport {
        &self.report
    }

    /// `Y₁` as a feasible set (a box when every row of `A₁` bounds a single
    /// coordinate); `None` when there is no first stage.
    pub fn first_stage(&self) -> Option<&FeasibleSet> {
        self.y1_set.as_ref()
    }

    fn first_stage_set(model: &EprmModel) -> Result<Option<FeasibleSet>> {
        let k1 = model.dims.y1;
        if k1 == 0 {
            return Ok(None);
        }
        let poly = Polytope::new(k1, model.a1_mat.clone(), model.a1.clone())
            .map_err(|e| assumption("feasible recourse", format!("first-stage set: {e}")))?;
        let axis_aligned = model
            .a1_mat
            .iter()
            .all(|row| row.iter().filter(|v| **v != 0.0).count() <= 1);
        if axis_aligned {
            if let Some(bbox) = poly.bounding_box() {
                return Ok(Some(FeasibleSet::Box(BoxSet::new(bbox.lo().to_vec(), bbox.hi().to_vec())?)));
            }
        }
        Ok(Some(FeasibleSet::Polytope(poly)))
    }

    /// Complete recourse: `{B₂₀y₂ : A₂y₂ ≤ a₂}` is all of `R^{n₂₂}`. The
    /// image is a nonempty polyhedron whose recession cone
    /// `{B₂₀d : A₂d ≤ 0}` must contain every `±eᵢ`.
    fn check_recourse(&self) -> Result<()> {
        let m = &self.model;
        let k2 = m.dims.y2;
        let mut base = LinearProgram::new(vec![0.0; k2]);
        for (row, b) in m.a2_mat.iter().zip(&m.a2) {
            base = base.le(row.clone(), *b);
        }
        if base.solve()?.status != LpStatus::Optimal {
            return Err(assumption("feasible recourse", "second-stage inequalities are infeasible"));
        }
        for i in 0..m.dims.coupling {
            for s in [1.0, -1.0] {
                let mut lp = LinearProgram::new(vec![0.0; k2]);
                for row in &m.a2_mat {
                    lp = lp.le(row.clone(), 0.0);
                }
                for (r, row) in m.b20.iter().enumerate() {
                    lp = lp.eq(row.clone(), if r == i { s } else { 0.0 });
                }
                if lp.solve()?.status != LpStatus::Optimal {
                    return Err(assumption(
                        "feasible recourse",
                        format!("recourse is not complete: direction {}e_{i} is unreachable", if s > 0.0 { "+" } else { "−" }),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The dual set as the feasible region of a program over `(λ₁, λ₂)`.
    fn dual_program(&self, objective: Vec<f64>) -> LinearProgram {
        let m = &self.model;
        let (n22, m2) = (m.dims.coupling, m.a2.len());
        let mut lp = LinearProgram::new(objective);
        for j in 0..m2 {
            lp = lp.le(unit(n22 + m2, n22 + j, 1.0), 0.0);
        }
        for i in 0..m.dims.y2 {
            let mut row: Vec<f64> = m.b20.iter().map(|r| r[i]).collect();
            row.extend(m.a2_mat.iter().map(|r| r[i]));
            lp = lp.eq(row, m.c2[i]);
        }
        lp
    }

    /// `max_D wᵀ(λ₁, λ₂)`.
    fn dual_max(&self, w: &[f64]) -> Result<f64> {
        let sol = self.dual_program(w.iter().map(|v| -v).collect()).solve()?;
        match sol.status {
            LpStatus::Optimal => Ok(-sol.value),
            LpStatus::Infeasible => Err(assumption("nonempty dual set", "the dual set is empty")),
            LpStatus::Unbounded => Err(assumption("bounded dual set", "the dual set is unbounded")),
            s => Err(Error::Lp {
                status: s.to_string(),
                context: Some("dual-set probe".into()),
            }),
        }
    }

    fn probe_dual_set(&self) -> Result<AssumptionReport> {
        let m = &self.model;
        let (n22, m2) = (m.dims.coupling, m.a2.len());
        let width = n22 + m2;
        let mut lambda1_range = Vec::with_capacity(n22);
        for i in 0..n22 {
            let hi = self.dual_max(&unit(width, i, 1.0))?;
            let lo = -self.dual_max(&unit(width, i, -1.0))?;
            lambda1_range.push((lo, hi));
        }
        let mut lambda2_min = Vec::with_capacity(m2);
        for j in 0..m2 {
            lambda2_min.push(-self.dual_max(&unit(width, n22 + j, -1.0))?);
        }
        let mut weight = m.k2.clone();
        weight.resize(width, 0.0);
        let k_hi = self.dual_max(&weight)?;
        let neg: Vec<f64> = weight.iter().map(|v| -v).collect();
        let k_lo = -self.dual_max(&neg)?;
        if k_lo < -NONNEGATIVITY_TOL {
            return Err(assumption("nonnegative k2 weight", format!("λ₁ᵀk₂ reaches {k_lo:.3e} < 0 on the dual set")));
        }
        let mut b21_bound = Vec::with_capacity(m.dims.y1);
        for j in 0..m.dims.y1 {
            let mut w: Vec<f64> = m.b21.iter().map(|r| r[j]).collect();
            w.resize(width, 0.0);
            let hi = self.dual_max(&w)?;
            let neg: Vec<f64> = w.iter().map(|v| -v).collect();
            let lo = -self.dual_max(&neg)?;
            b21_bound.push(hi.abs().max(lo.abs()));
        }
        Ok(AssumptionReport {
            lambda1_range,
            lambda2_min,
            k2_weight: (k_lo.max(0.0), k_hi),
            b21_bound,
        })
    }

    /// The second-stage right-hand side `z·k₂ + k̃₂ − B₂₁y₁`.
    pub fn rhs(&self, y1: &[f64], z: f64) -> Vec<f64> {
        let m = &self.model;
        m.k2
            .iter()
            .zip(&m.k2_tilde)
            .zip(&m.b21)
            .map(|((k, kt), row)| z * k + kt - dot(row, y1))
            .collect()
    }

    /// `Q(y₁, z)` with the minimum-`‖λ₁‖₁` dual selection.
    pub fn second_stage(&self, y1: &[f64], z: f64) -> Result<SecondStage> {
        self.second_stage_with(y1, z, TieBreak::MinLambda1)
    }

    pub fn second_stage_with(&self, y1: &[f64], z: f64, tie: TieBreak) -> Result<SecondStage> {
        let m = &self.model;
        check_dim(m.dims.y1, y1.len())?;
        if !z.is_finite() || !y1.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite second-stage input".into()));
        }
        let rhs = self.rhs(y1, z);
        let mut lp = LinearProgram::new(m.c2.clone());
        for (row, b) in m.a2_mat.iter().zip(&m.a2) {
            lp = lp.le(row.clone(), *b);
        }
        for (row, b) in m.b20.iter().zip(&rhs) {
            lp = lp.eq(row.clone(), *b);
        }
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp {
                status: sol.status.to_string(),
                context: Some(format!("second stage at z = {z}")),
            });
        }
        let (lambda1, lambda2) = match tie {
            TieBreak::Simplex => (sol.dual_eq.clone(), sol.dual_ub.clone()),
            TieBreak::MinLambda1 => self
                .min_lambda1_dual(&rhs, sol.value)?
                .unwrap_or_else(|| (sol.dual_eq.clone(), sol.dual_ub.clone())),
        };
        let mut chosen = sol.clone();
        chosen.dual_eq = lambda1.clone();
        chosen.dual_ub = lambda2.clone();
        let certificate = lp.certificate(&chosen);
        Ok(SecondStage {
            value: sol.value,
            y2: sol.x,
            lambda1,
            lambda2,
            certificate,
        })
    }

    /// Minimizes `‖λ₁‖₁` over the dual points whose objective is within a
    /// relative `1e-12` of the optimal value `v`. Returns `None` when the
    /// auxiliary program fails, in which case the simplex duals are kept.
    fn min_lambda1_dual(&self, rhs: &[f64], v: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let m = &self.model;
        let (n22, m2) = (m.dims.coupling, m.a2.len());
        let width = 2 * n22 + m2;
        let mut c = vec![0.0; width];
        c[n22 + m2..].iter_mut().for_each(|v| *v = 1.0);
        let mut lp = self.dual_program(vec![0.0; n22 + m2]);
        lp.c = c;
        for row in lp.a_ub.iter_mut().chain(lp.a_eq.iter_mut()) {
            row.resize(width, 0.0);
        }
        for i in 0..n22 {
            let mut up = unit(width, i, 1.0);
            up[n22 + m2 + i] = -1.0;
            let mut down = unit(width, i, -1.0);
            down[n22 + m2 + i] = -1.0;
            lp = lp.le(up, 0.0).le(down, 0.0);
        }
        let mut face = vec![0.0; width];
        for (f, r) in face.iter_mut().zip(rhs) {
            *f = -r;
        }
        for (f, a) in face[n22..n22 + m2].iter_mut().zip(&m.a2) {
            *f = -a;
        }
        lp = lp.le(face, -(v - FACE_SLACK * (1.0 + v.abs())));
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Ok(None);
        }
        Ok(Some((sol.x[..n22].to_vec(), sol.x[n22..n22 + m2].to_vec())))
    }

    /// `ℛ(Z)` for the distribution with the given atoms and weights.
    ///
    /// The outer minimization over `Y₁` is solved by Kelley's cutting-plane
    /// method, which terminates finitely on this piecewise-linear objective;
    /// the result is certified by the cutting-plane lower bound.
    pub fn evaluate(&self, atoms: &[f64], weights: &[f64]) -> Result<EprmValue> {
        check_dim(atoms.len(), weights.len())?;
        if atoms.is_empty() {
            return Err(Error::param("the distribution needs at least one atom"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("weights sum to {total}, not 1")));
        }
        let m = &self.model;
        let k1 = m.dims.y1;
        let phi = |y: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut value = dot(&m.c1, y);
            let mut grad = m.c1.clone();
            for (i, (z, w)) in atoms.iter().zip(weights).enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let ss = self.second_stage_with(y, *z, TieBreak::Simplex).map_err(|e| match e {
                    Error::Lp { status, .. } => Error::Lp {
                        status,
                        context: Some(format!("atom {i}")),
                    },
                    e => e,
                })?;
                value += w * ss.value;
                for (g, b) in grad.iter_mut().zip(transpose_mul(&m.b21, &ss.lambda1, k1)) {
                    *g -= w * b;
                }
            }
            Ok((value, grad))
        };
        let Some(set) = &self.y1_set else {
            let (value, _) = phi(&[])?;
            return Ok(EprmValue {
                value,
                lower_bound: value,
                y1: vec![],
                iterations: 0,
            });
        };
        let mut y = set.start_point();
        let mut best = (f64::INFINITY, y.clone());
        let mut master = LinearProgram::new(unit(k1 + 1, k1, 1.0));
        for (row, b) in m.a1_mat.iter().zip(&m.a1) {
            let mut r = row.clone();
            r.push(0.0);
            master = master.le(r, *b);
        }
        let mut lower = f64::NEG_INFINITY;
        for it in 1..=EVALUATE_MAX_ITER {
            let (value, grad) = phi(&y)?;
            if value < best.0 {
                best = (value, y.clone());
            }
            // Cut: t ≥ φ(y) + gᵀ(y' − y).
            let mut row = grad.clone();
            row.push(-1.0);
            master = master.le(row, dot(&grad, &y) - value);
            let sol = master.solve()?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Lp {
                    status: sol.status.to_string(),
                    context: Some("cutting-plane master".into()),
                });
            }
            lower = sol.value;
            if best.0 - lower <= EVALUATE_TOL * (1.0 + best.0.abs()) {
                return Ok(EprmValue {
                    value: best.0,
                    lower_bound: lower.min(best.0),
                    y1: best.1,
                    iterations: it,
                });
            }
            y = sol.x[..k1].to_vec();
        }
        Err(Error::Convergence {
            iterations: EVALUATE_MAX_ITER,
            gap: best.0 - lower,
        })
    }

    /// `c₁ − B₂₁ᵀλ₁`, the first-stage block of the lifted subgradient.
    pub(crate) fn first_stage_grad(&self, lambda1: &[f64]) -> Vec<f64> {
        let m = &self.model;
        let b = transpose_mul(&m.b21, lambda1, m.dims.y1);
        m.c1.iter().zip(b).map(|(c, b)| c - b).collect()
    }
}
