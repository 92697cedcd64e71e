//! Proximal setups: the Euclidean, entropy and p-norm distance-generating
//! functions with their prox mappings and constants, and the ball-restricted
//! Euclidean prox of the shrinking-ball multistep method.
//!
//! For a distance-generating function ω the Bregman distance is
//! `V_x(y) = ω(y) − ω(x) − ω'(x)ᵀ(y − x)` and the prox mapping is
//! `Prox_x(ζ) = argmin_{y∈X} ζᵀy + V_x(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Norm};
use crate::sets::{FeasibleSet, FloorSimplex};

/// Which distance-generating function a setup uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupKind {
    /// `ω(x) = ½‖x‖₂²` with the ℓ₂ norm.
    Euclidean,
    /// `ω(x) = Σ xᵢ ln xᵢ` on the probability simplex with the ℓ₁ norm.
    Entropy,
    /// `ω(x) = (1/(pγ)) Σ |xᵢ|^p` on a floor simplex with the ℓ₁ norm.
    #[serde(rename = "pnorm")]
    PNorm,
}

impl SetupKind {
    pub fn name(self) -> &'static str {
        match self {
            SetupKind::Euclidean => "euclidean",
            SetupKind::Entropy => "entropy",
            SetupKind::PNorm => "pnorm",
        }
    }

    /// Primal norm the setup is strongly convex with respect to.
    pub fn norm(self) -> Norm {
        match self {
            SetupKind::Euclidean => Norm::L2,
            SetupKind::Entropy | SetupKind::PNorm => Norm::L1,
        }
    }
}

impl std::str::FromStr for SetupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(SetupKind::Euclidean),
            "entropy" => Ok(SetupKind::Entropy),
            "pnorm" | "p-norm" => Ok(SetupKind::PNorm),
            other => Err(Error::param(format!("unknown proximal setup `{other}`"))),
        }
    }
}

/// Constants of a setup on a given set: the ω-center, the ω-radius
/// `D_{ω,X} = √(2[max ω − min ω])`, the strong-convexity modulus μ(ω) and the
/// quadratic-growth constant M(ω) with `V_x(y) ≤ ½M(ω)‖x − y‖²` when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConstants {
    pub x_omega: Vec<f64>,
    pub d_omega: f64,
    pub mu_omega: f64,
    pub m_omega: Option<f64>,
}

/// A proximal setup bound to a feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalSetup {
    kind: SetupKind,
    set: FeasibleSet,
    constants: SetupConstants,
    /// Exponent and scale of the p-norm function; unused by the other setups.
    p: f64,
    gamma: f64,
}

/// Exponent `p = 1 + 1/ln n` and scale `γ = 1/(e ln n)` of the p-norm setup.
pub fn pnorm_parameters(n: usize) -> (f64, f64) {
    let ln = (n as f64).ln();
    (1.0 + 1.0 / ln, 1.0 / (std::f64::consts::E * ln))
}

impl ProximalSetup {
    pub fn new(kind: SetupKind, set: &FeasibleSet) -> Result<Self> {
        let constants = setup_constants(kind, set)?;
        let (p, gamma) = match kind {
            SetupKind::PNorm => pnorm_parameters(set.dim()),
            _ => (2.0, 1.0),
        };
        Ok(ProximalSetup {
            kind,
            set: set.clone(),
            constants,
            p,
            gamma,
        })
    }

    pub fn euclidean(set: &FeasibleSet) -> Result<Self> {
        Self::new(SetupKind::Euclidean, set)
    }

    pub fn entropy(set: &FeasibleSet) -> Result<Self> {
        Self::new(SetupKind::Entropy, set)
    }

    pub fn pnorm(set: &FeasibleSet) -> Result<Self> {
        Self::new(SetupKind::PNorm, set)
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn norm(&self) -> Norm {
        self.kind.norm()
    }

    pub fn dual_norm(&self) -> Norm {
        self.kind.norm().dual()
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn constants(&self) -> &SetupConstants {
        &self.constants
    }

    /// `(p, γ)` of the p-norm setup.
    pub fn pnorm_params(&self) -> (f64, f64) {
        (self.p, self.gamma)
    }

    /// The distance-generating function ω.
    pub fn omega(&self, x: &[f64]) -> f64 {
        match self.kind {
            SetupKind::Euclidean => 0.5 * dot(x, x),
            SetupKind::Entropy => x.iter().map(|&v| xlnx(v)).sum(),
            SetupKind::PNorm => {
                x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>() / (self.p * self.gamma)
            }
        }
    }

    /// Gradient ω'(x).
    pub fn omega_grad(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            SetupKind::Euclidean => x.to_vec(),
            SetupKind::Entropy => x.iter().map(|&v| 1.0 + v.ln()).collect(),
            SetupKind::PNorm => x
                .iter()
                .map(|&v| v.signum() * v.abs().powf(self.p - 1.0) / self.gamma)
                .collect(),
        }
    }

    /// Bregman distance `V_x(y)`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            SetupKind::Euclidean => 0.5 * Norm::L2.dist(x, y).powi(2),
            // Written as a relative entropy so that zero coordinates of y are exact.
            SetupKind::Entropy => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| if yi > 0.0 { yi * (yi / xi).ln() } else { 0.0 } - yi + xi)
                .sum(),
            SetupKind::PNorm => {
                let g = self.omega_grad(x);
                let lin: f64 = g.iter().zip(y.iter().zip(x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
                self.omega(y) - self.omega(x) - lin
            }
        }
    }

    /// `Prox_x(ζ)` on the bound set.
    pub fn prox(&self, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.set.dim(), x.len())?;
        check_dim(x.len(), zeta.len())?;
        match self.kind {
            SetupKind::Euclidean => prox_euclidean(x, zeta, &self.set),
            SetupKind::Entropy => {
                let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
                Ok(prox_entropy(&log_x, zeta)?.into_iter().map(f64::exp).collect())
            }
            SetupKind::PNorm => {
                let simplex = self.set.as_simplex().expect("checked at construction");
                prox_pnorm(x, zeta, simplex, self.p, self.gamma)
            }
        }
    }
}

fn xlnx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Closed-form constants of a setup on one of the shipped sets.
pub fn setup_constants(kind: SetupKind, set: &FeasibleSet) -> Result<SetupConstants> {
    let n = set.dim();
    match kind {
        SetupKind::Euclidean => {
            let x_omega = set.project(&vec![0.0; n])?;
            let far = set.max_distance(&vec![0.0; n], Norm::L2);
            let d = (far * far - dot(&x_omega, &x_omega)).max(0.0).sqrt();
            Ok(SetupConstants {
                x_omega,
                d_omega: d,
                mu_omega: 1.0,
                m_omega: Some(1.0),
            })
        }
        SetupKind::Entropy => {
            let s = set.as_simplex().filter(|s| s.mass() == 1.0 && s.floor() == 0.0).ok_or_else(|| {
                Error::unsupported("the entropy setup needs the probability simplex")
            })?;
            if s.dim() < 2 {
                return Err(Error::unsupported("the entropy setup needs n ≥ 2"));
            }
            Ok(SetupConstants {
                x_omega: vec![1.0 / n as f64; n],
                d_omega: (2.0 * (n as f64).ln()).sqrt(),
                mu_omega: 1.0,
                m_omega: None,
            })
        }
        SetupKind::PNorm => {
            let s = set
                .as_simplex()
                .ok_or_else(|| Error::unsupported("the p-norm setup needs a floor simplex"))?;
            if n < 2 {
                return Err(Error::unsupported("the p-norm setup needs n ≥ 2"));
            }
            let (p, gamma) = pnorm_parameters(n);
            let a = s.mass();
            let b = s.floor();
            let ln = (n as f64).ln();
            let e = std::f64::consts::E;
            Ok(SetupConstants {
                x_omega: vec![a / n as f64; n],
                d_omega: ((2.0 * a.powf(p) / (p * gamma)) * (1.0 - (n as f64).powf(-1.0 / ln))).sqrt(),
                mu_omega: e / (n as f64 * a.powf(2.0 - p)),
                m_omega: (b > 0.0).then(|| e / b.powf(1.0 - 1.0 / ln)),
            })
        }
    }
}

/// Euclidean prox: `Π_X(x − ζ)`.
pub fn prox_euclidean(x: &[f64], zeta: &[f64], set: &FeasibleSet) -> Result<Vec<f64>> {
    check_dim(x.len(), zeta.len())?;
    let y: Vec<f64> = x.iter().zip(zeta).map(|(a, b)| a - b).collect();
    set.project(&y)
}

/// Entropy prox carried in the log domain: with `z = ln x`, returns
/// `z₊ = w − ln Σ e^{w}` where `w = z − ζ − max(z − ζ)`.
pub fn prox_entropy(log_x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
    check_dim(log_x.len(), zeta.len())?;
    let mut w: Vec<f64> = log_x.iter().zip(zeta).map(|(z, g)| z - g).collect();
    entropy_normalize(&mut w);
    Ok(w)
}

/// Shifts log-weights so that they exponentiate onto the simplex.
pub(crate) fn entropy_normalize(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in w.iter_mut() {
        *v -= max;
    }
    let lse = w.iter().map(|v| v.exp()).sum::<f64>().ln();
    for v in w.iter_mut() {
        *v -= lse;
    }
}

/// p-norm prox on the floor simplex `{Σy = a, y ≥ b}`: with
/// `z = ζ − ω'(x)` the minimizer of `ω(y) + zᵀy` is
/// `yᵢ = max((γ(ν − zᵢ))^{1/(p−1)}, b)`, where the multiplier ν is found by
/// bisection so that the coordinates sum to `a`.
pub fn prox_pnorm(x: &[f64], zeta: &[f64], set: &FloorSimplex, p: f64, gamma: f64) -> Result<Vec<f64>> {
    check_dim(set.dim(), x.len())?;
    check_dim(x.len(), zeta.len())?;
    if !(p > 1.0 && gamma > 0.0) {
        return Err(Error::param("p-norm prox needs p > 1 and γ > 0"));
    }
    let (a, b) = (set.mass(), set.floor());
    let q = 1.0 / (p - 1.0);
    let z: Vec<f64> = x
        .iter()
        .zip(zeta)
        .map(|(&xi, &zi)| zi - xi.signum() * xi.abs().powf(p - 1.0) / gamma)
        .collect();
    let point = |nu: f64| -> Vec<f64> {
        z.iter()
            .map(|&zi| {
                let t = gamma * (nu - zi);
                if t > 0.0 {
                    t.powf(q).max(b)
                } else {
                    b
                }
            })
            .collect()
    };
    let mass = |nu: f64| point(nu).iter().sum::<f64>();

    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = zmin;
    let mut hi = zmax + a.powf(p - 1.0) / gamma;
    if !(mass(lo) <= a && mass(hi) >= a) {
        return Err(Error::Numerical(format!(
            "p-norm prox bracket [{lo}, {hi}] does not enclose the root (masses {}, {})",
            mass(lo),
            mass(hi)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = point(0.5 * (lo + hi));
    // Spread the tiny remaining mass defect over the coordinates above the floor.
    let defect = a - y.iter().sum::<f64>();
    let above: f64 = y.iter().map(|v| v - b).sum();
    if defect != 0.0 && above > 0.0 {
        for v in &mut y {
            *v += defect * (*v - b) / above;
        }
    }
    Ok(y)
}

/// Euclidean prox over `X ∩ B(center, radius)`: the projection of `x − ζ` onto
/// the intersection, computed by Dykstra's alternating projections.
///
/// Returns the last projection onto X, so the result is exactly feasible and
/// lies in the ball up to the stopping tolerance.
pub fn prox_ball_restricted(
    setup: &ProximalSetup,
    center: &[f64],
    radius: f64,
    x: &[f64],
    zeta: &[f64],
) -> Result<Vec<f64>> {
    if setup.kind != SetupKind::Euclidean {
        return Err(Error::unsupported("the ball-restricted prox needs the Euclidean setup"));
    }
    if !(radius > 0.0) {
        return Err(Error::param("ball radius must be positive"));
    }
    let set = &setup.set;
    check_dim(set.dim(), center.len())?;
    check_dim(set.dim(), x.len())?;
    check_dim(set.dim(), zeta.len())?;
    let target: Vec<f64> = x.iter().zip(zeta).map(|(a, b)| a - b).collect();
    let direct = set.project(&target)?;
    if Norm::L2.dist(&direct, center) <= radius {
        return Ok(direct);
    }
    let n = target.len();
    let ball = |v: &[f64]| -> Vec<f64> {
        let d = Norm::L2.dist(v, center);
        if d <= radius {
            v.to_vec()
        } else {
            center.iter().zip(v).map(|(c, vi)| c + radius / d * (vi - c)).collect()
        }
    };
    let mut y = target.clone();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut last_x = direct;
    for _ in 0..10_000 {
        let u: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a + b).collect();
        let xs = set.project(&u)?;
        for i in 0..n {
            p[i] = u[i] - xs[i];
        }
        let v: Vec<f64> = xs.iter().zip(&q).map(|(a, b)| a + b).collect();
        let yb = ball(&v);
        for i in 0..n {
            q[i] = v[i] - yb[i];
        }
        let moved = Norm::L2.dist(&xs, &last_x).max(Norm::L2.dist(&yb, &y));
        y = yb;
        last_x = xs;
        if moved < 1e-10 {
            break;
        }
    }
    Ok(last_x)
}

/// Largest violation of the prox optimality conditions, used by tests and
/// diagnostics: `max_{v} (x₊ − v)ᵀ(ω'(x₊) + ζ − ω'(x))` over the set's LMO.
pub fn prox_gap(setup: &ProximalSetup, x: &[f64], zeta: &[f64], x_plus: &[f64]) -> Result<f64> {
    let gx = setup.omega_grad(x);
    let gp = setup.omega_grad(x_plus);
    let c: Vec<f64> = (0..x.len()).map(|i| gp[i] + zeta[i] - gx[i]).collect();
    let v = setup.set.lmo(&c)?;
    Ok(dot(&c, x_plus) - dot(&c, &v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(n: usize) -> FeasibleSet {
        FeasibleSet::Simplex(FloorSimplex::probability(n).unwrap())
    }

    #[test]
    fn euclidean_prox_of_a_feasible_point_with_zero_step() {
        let x = vec![1.0 / 3.0; 3];
        assert_eq!(prox_euclidean(&x, &[0.0; 3], &simplex(3)).unwrap(), x);
    }

    #[test]
    fn euclidean_prox_from_a_vertex() {
        let p = prox_euclidean(&[1.0, 0.0], &[1.0, 0.0], &simplex(2)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn euclidean_prox_on_box_simplex_is_identity_for_feasible_points() {
        let set = FeasibleSet::box_simplex(1.0, FloorSimplex::probability(3).unwrap()).unwrap();
        let x = vec![0.3, 0.2, 0.5, 0.3];
        let p = prox_euclidean(&x, &[0.0; 4], &set).unwrap();
        for (a, b) in p.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_prox_hand_value() {
        let z = [0.5f64.ln(), 0.5f64.ln()];
        let out = prox_entropy(&z, &[2f64.ln(), 0.0]).unwrap();
        assert!((out[0].exp() - 1.0 / 3.0).abs() < 1e-15);
        assert!((out[1].exp() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_prox_ignores_constant_shifts() {
        let z = vec![(0.25f64).ln(); 4];
        let out = prox_entropy(&z, &[7.0; 4]).unwrap();
        for v in out {
            assert!((v.exp() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_prox_survives_huge_steps() {
        let z = vec![(1.0f64 / 3.0).ln(); 3];
        let out = prox_entropy(&z, &[1e4, -1e4, 0.0]).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        let s: f64 = out.iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((out[1].exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_constants_for_a_hundred_coordinates() {
        let c = setup_constants(SetupKind::Entropy, &simplex(100)).unwrap();
        assert!((c.d_omega - 3.034854258770293).abs() < 1e-12);
        assert_eq!(c.mu_omega, 1.0);
    }

    #[test]
    fn euclidean_constants_have_unit_moduli() {
        let c = setup_constants(SetupKind::Euclidean, &simplex(4)).unwrap();
        assert_eq!((c.mu_omega, c.m_omega), (1.0, Some(1.0)));
        assert!((c.d_omega - (0.75f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pnorm_constants_on_a_floor_simplex() {
        let set = FeasibleSet::Simplex(FloorSimplex::new(3, 1.0, 0.1).unwrap());
        let c = setup_constants(SetupKind::PNorm, &set).unwrap();
        let p = 1.0 + 1.0 / 3f64.ln();
        let e = std::f64::consts::E;
        assert!((c.mu_omega - e / (3.0 * 1f64.powf(2.0 - p))).abs() < 1e-15);
        assert!((c.m_omega.unwrap() - e / 0.1f64.powf(1.0 - 1.0 / 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_floor_simplex() {
        let set = FeasibleSet::Simplex(FloorSimplex::new(3, 1.0, 0.1).unwrap());
        assert!(matches!(ProximalSetup::entropy(&set), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pnorm_prox_at_the_center_is_a_fixed_point() {
        let set = FeasibleSet::Simplex(FloorSimplex::new(5, 1.0, 0.05).unwrap());
        let setup = ProximalSetup::pnorm(&set).unwrap();
        let x = setup.constants().x_omega.clone();
        let out = setup.prox(&x, &[0.0; 5]).unwrap();
        for (a, b) in out.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(prox_gap(&setup, &x, &[0.0; 5], &out).unwrap() < 1e-8);
    }

    #[test]
    fn ball_prox_along_the_simplex_edge() {
        let setup = ProximalSetup::euclidean(&simplex(2)).unwrap();
        let out = prox_ball_restricted(&setup, &[1.0, 0.0], 0.1, &[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let s = 0.1 / 2f64.sqrt();
        assert!((out[0] - (1.0 - s)).abs() < 1e-8);
        assert!((out[1] - s).abs() < 1e-8);
    }

    #[test]
    fn ball_prox_with_a_large_radius_is_the_plain_prox() {
        let setup = ProximalSetup::euclidean(&simplex(3)).unwrap();
        let x = [0.2, 0.3, 0.5];
        let z = [0.4, -0.1, 0.3];
        let a = prox_ball_restricted(&setup, &x, 10.0, &x, &z).unwrap();
        let b = setup.prox(&x, &z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ball_prox_needs_the_euclidean_setup() {
        let setup = ProximalSetup::entropy(&simplex(3)).unwrap();
        let x = [1.0 / 3.0; 3];
        assert!(matches!(
            prox_ball_restricted(&setup, &x, 0.5, &x, &[0.0; 3]),
            Err(Error::Unsupported(_))
        ));
    }
}
