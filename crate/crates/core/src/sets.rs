//! Feasible sets: the floor simplex, boxes, general bounded polytopes and
//! block products of these.
//!
//! Every set offers a membership test, an exact Euclidean projection (exact
//! for simplices and boxes, computed by Dykstra's method over halfspaces for
//! general polytopes), a linear minimization oracle, a designated start point
//! and the largest distance from a given point in a chosen norm.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{argmin, dot, Norm};
use crate::lp::{LinearProgram, LpStatus};

/// Absolute tolerance on constraint residuals used for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// `{x ∈ Rⁿ : Σ xᵢ = a, xᵢ ≥ b}` with `0 ≤ b < a/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSimplex {
    n: usize,
    a: f64,
    b: f64,
}

impl FloorSimplex {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("simplex dimension must be at least 1"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::param(format!("simplex mass a = {a} must be positive")));
        }
        if !(b.is_finite() && b >= 0.0 && b < a / n as f64) {
            return Err(Error::param(format!(
                "simplex floor b = {b} must satisfy 0 ≤ b < a/n = {}",
                a / n as f64
            )));
        }
        Ok(FloorSimplex { n, a, b })
    }

    /// The probability simplex in dimension `n`.
    pub fn probability(n: usize) -> Result<Self> {
        FloorSimplex::new(n, 1.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> f64 {
        self.a
    }

    pub fn floor(&self) -> f64 {
        self.b
    }

    fn residual(&self, x: &[f64]) -> f64 {
        let sum: f64 = x.iter().sum();
        let low = x.iter().fold(0.0f64, |m, &v| m.max(self.b - v));
        (sum - self.a).abs().max(low)
    }

    fn center(&self) -> Vec<f64> {
        vec![self.a / self.n as f64; self.n]
    }

    /// Vertex `i`: floor everywhere and the remaining mass on coordinate `i`.
    fn vertex(&self, i: usize) -> Vec<f64> {
        let mut v = vec![self.b; self.n];
        v[i] += self.a - self.n as f64 * self.b;
        v
    }

    fn lmo(&self, c: &[f64]) -> Vec<f64> {
        self.vertex(argmin(c))
    }

    /// Sort-based Euclidean projection: shift by the floor and project onto the
    /// simplex of the remaining mass.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let free = self.a - self.n as f64 * self.b;
        let shifted: Vec<f64> = y.iter().map(|v| v - self.b).collect();
        let mut p = project_simplex(&shifted, free);
        for v in &mut p {
            *v += self.b;
        }
        p
    }

    fn max_distance(&self, from: &[f64], norm: Norm) -> f64 {
        (0..self.n)
            .map(|i| norm.dist(from, &self.vertex(i)))
            .fold(0.0, f64::max)
    }
}

/// Euclidean projection of `y` onto `{x ≥ 0, Σx = s}`.
pub fn project_simplex(y: &[f64], s: f64) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - s) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Axis-aligned box `{lo ≤ x ≤ hi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::param("box dimension must be at least 1"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::param("box bounds must be finite with lo ≤ hi"));
        }
        Ok(BoxSet { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn residual(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .fold(0.0f64, |m, (&v, (&l, &h))| m.max(l - v).max(v - h))
    }

    fn lmo(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&ci, (&l, &h))| if ci > 0.0 { l } else { h })
            .collect()
    }

    fn project(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect()
    }

    fn max_distance(&self, from: &[f64], norm: Norm) -> f64 {
        let far = from
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (v - l).abs().max((h - v).abs()));
        match norm {
            Norm::L1 => far.sum(),
            Norm::L2 => far.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => far.fold(0.0, f64::max),
        }
    }
}

/// Bounded polytope `{y : A y ≤ b}` given by halfspaces.
///
/// Its bounding box and a feasible start point are computed by linear
/// programming at construction; the bounding box also serves as the
/// (conservative) diameter estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    bbox: Option<BoxSet>,
    start: Vec<f64>,
    dim: usize,
}

impl Polytope {
    /// Builds the polytope, failing if it is empty or unbounded.
    pub fn new(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        for row in &a {
            check_dim(dim, row.len())?;
        }
        if dim == 0 {
            return Ok(Polytope {
                a,
                b,
                bbox: None,
                start: vec![],
                dim,
            });
        }
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        let mut start = vec![0.0; dim];
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; dim];
                c[i] = sign;
                let lp = LinearProgram {
                    c,
                    a_ub: a.clone(),
                    b_ub: b.clone(),
                    ..Default::default()
                };
                let sol = lp.solve()?;
                match sol.status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => return Err(Error::param("polytope is empty")),
                    LpStatus::Unbounded => return Err(Error::param("polytope is unbounded")),
                    s => return Err(Error::Lp { status: s.to_string(), context: None }),
                }
                if sign > 0.0 {
                    lo[i] = sol.x[i];
                } else {
                    hi[i] = sol.x[i];
                }
                for (s, v) in start.iter_mut().zip(&sol.x) {
                    *s += v / (2 * dim) as f64;
                }
            }
        }
        Ok(Polytope {
            a,
            b,
            bbox: Some(BoxSet::new(lo, hi)?),
            start,
            dim,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Tight coordinate-wise bounds of the polytope.
    pub fn bounding_box(&self) -> Option<&BoxSet> {
        self.bbox.as_ref()
    }

    fn residual(&self, y: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .fold(0.0f64, |m, (row, &bi)| m.max(dot(row, y) - bi))
    }

    fn lmo(&self, c: &[f64]) -> Result<Vec<f64>> {
        if self.dim == 0 {
            return Ok(vec![]);
        }
        let lp = LinearProgram {
            c: c.to_vec(),
            a_ub: self.a.clone(),
            b_ub: self.b.clone(),
            ..Default::default()
        };
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp {
                status: sol.status.to_string(),
                context: Some("polytope linear minimization".into()),
            });
        }
        Ok(sol.x)
    }

    /// Dykstra's method cycling over the halfspaces.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        if self.dim == 0 {
            return vec![];
        }
        let mut x = y.to_vec();
        let mut corr = vec![vec![0.0; self.dim]; self.a.len()];
        for _ in 0..10_000 {
            let prev = x.clone();
            for (k, (row, &bk)) in self.a.iter().zip(&self.b).enumerate() {
                let z: Vec<f64> = x.iter().zip(&corr[k]).map(|(a, c)| a + c).collect();
                let nn = dot(row, row);
                let viol = dot(row, &z) - bk;
                let p: Vec<f64> = if viol > 0.0 && nn > 0.0 {
                    z.iter().zip(row).map(|(zi, ri)| zi - viol / nn * ri).collect()
                } else {
                    z.clone()
                };
                for i in 0..self.dim {
                    corr[k][i] = z[i] - p[i];
                }
                x = p;
            }
            let moved = x.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if moved < 1e-14 {
                break;
            }
        }
        x
    }

    fn max_distance(&self, from: &[f64], norm: Norm) -> f64 {
        self.bbox.as_ref().map_or(0.0, |b| b.max_distance(from, norm))
    }
}

/// A feasible set of one of the shipped families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    Simplex(FloorSimplex),
    Box(BoxSet),
    Polytope(Polytope),
    /// Cartesian product; coordinates are the blocks' coordinates concatenated.
    Product { blocks: Vec<FeasibleSet> },
}

impl FeasibleSet {
    /// `{|x₀| ≤ r} × {Σx = a, x ≥ b}`, the set of the CVaR portfolio instances.
    pub fn box_simplex(r: f64, simplex: FloorSimplex) -> Result<Self> {
        Ok(FeasibleSet::Product {
            blocks: vec![
                FeasibleSet::Box(BoxSet::new(vec![-r], vec![r])?),
                FeasibleSet::Simplex(simplex),
            ],
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Simplex(s) => s.n,
            FeasibleSet::Box(b) => b.lo.len(),
            FeasibleSet::Polytope(p) => p.dim,
            FeasibleSet::Product { blocks } => blocks.iter().map(|b| b.dim()).sum(),
        }
    }

    /// Largest constraint violation of `x` (zero when feasible).
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            FeasibleSet::Simplex(s) => s.residual(x),
            FeasibleSet::Box(b) => b.residual(x),
            FeasibleSet::Polytope(p) => p.residual(x),
            FeasibleSet::Product { blocks } => {
                let mut off = 0;
                let mut r: f64 = 0.0;
                for blk in blocks {
                    let d = blk.dim();
                    r = r.max(blk.residual(&x[off..off + d]));
                    off += d;
                }
                r
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && crate::linalg::all_finite(x) && self.residual(x) <= tol
    }

    /// Errors unless `x` has the right dimension and lies in the set.
    pub fn check_member(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        let residual = self.residual(x);
        if residual > MEMBERSHIP_TOL || !crate::linalg::all_finite(x) {
            return Err(Error::Domain { residual });
        }
        Ok(())
    }

    /// The designated start point: the barycenter for simplices, the center of
    /// boxes and an interior-ish LP average for polytopes.
    pub fn start_point(&self) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex(s) => s.center(),
            FeasibleSet::Box(b) => b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            FeasibleSet::Polytope(p) => p.start.clone(),
            FeasibleSet::Product { blocks } => blocks.iter().flat_map(|b| b.start_point()).collect(),
        }
    }

    /// Minimizer of `cᵀx` over the set (ties resolve to the lowest index).
    pub fn lmo(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), c.len())?;
        Ok(match self {
            FeasibleSet::Simplex(s) => s.lmo(c),
            FeasibleSet::Box(b) => b.lmo(c),
            FeasibleSet::Polytope(p) => p.lmo(c)?,
            FeasibleSet::Product { blocks } => {
                let mut out = Vec::with_capacity(c.len());
                let mut off = 0;
                for blk in blocks {
                    let d = blk.dim();
                    out.extend(blk.lmo(&c[off..off + d])?);
                    off += d;
                }
                out
            }
        })
    }

    /// Euclidean projection of `y` onto the set.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        Ok(self.project_unchecked(y))
    }

    pub(crate) fn project_unchecked(&self, y: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex(s) => s.project(y),
            FeasibleSet::Box(b) => b.project(y),
            FeasibleSet::Polytope(p) => p.project(y),
            FeasibleSet::Product { blocks } => {
                let mut out = Vec::with_capacity(y.len());
                let mut off = 0;
                for blk in blocks {
                    let d = blk.dim();
                    out.extend(blk.project_unchecked(&y[off..off + d]));
                    off += d;
                }
                out
            }
        }
    }

    /// `max_{x ∈ X} ‖x − from‖`; exact for simplices, boxes and their
    /// products, an upper bound through the bounding box for polytopes.
    pub fn max_distance(&self, from: &[f64], norm: Norm) -> f64 {
        match self {
            FeasibleSet::Simplex(s) => s.max_distance(from, norm),
            FeasibleSet::Box(b) => b.max_distance(from, norm),
            FeasibleSet::Polytope(p) => p.max_distance(from, norm),
            FeasibleSet::Product { blocks } => {
                let mut off = 0;
                let mut parts = Vec::with_capacity(blocks.len());
                for blk in blocks {
                    let d = blk.dim();
                    parts.push(blk.max_distance(&from[off..off + d], norm));
                    off += d;
                }
                match norm {
                    Norm::L1 => parts.iter().sum(),
                    Norm::L2 => parts.iter().map(|d| d * d).sum::<f64>().sqrt(),
                    Norm::Linf => parts.iter().copied().fold(0.0, f64::max),
                }
            }
        }
    }

    /// The set as a floor simplex, if it is one.
    pub fn as_simplex(&self) -> Option<&FloorSimplex> {
        match self {
            FeasibleSet::Simplex(s) => Some(s),
            _ => None,
        }
    }
}
