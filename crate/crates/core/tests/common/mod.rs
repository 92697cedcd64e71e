//! Property checks shared by the integration tests and the acceptance run.
//!
//! Every check returns the worst slack it observed so that callers can both
//! assert on it and report it.

#![allow(dead_code)]

use mirror_bounds::linalg::dot;
use mirror_bounds::problem::StochasticProblem;
use mirror_bounds::problems::{gen_instance1, gen_instance2};
use mirror_bounds::prox::ProximalSetup;
use mirror_bounds::seeds::{derive_seed, rng_from_seed, Rng};
use mirror_bounds::sets::{FeasibleSet, FloorSimplex};
use mirror_bounds::solvers::{smd_run, SolverConfig};
use mirror_bounds::eprm::{eprm_reformulate, mean_cvar_as_eprm, Eprm, LinearLoss};
use mirror_bounds::Norm;
use rand::Rng as _;

/// The three setups exercised by the proximal properties, each on the set it
/// is designed for.
pub fn setups(n: usize) -> Vec<ProximalSetup> {
    let simplex = FeasibleSet::Simplex(FloorSimplex::probability(n).unwrap());
    let floor = FeasibleSet::Simplex(FloorSimplex::new(n, 1.0, 0.5 / n as f64).unwrap());
    vec![
        ProximalSetup::euclidean(&simplex).unwrap(),
        ProximalSetup::entropy(&simplex).unwrap(),
        ProximalSetup::pnorm(&floor).unwrap(),
    ]
}

/// A random point of the floor simplex with every coordinate above the floor.
pub fn random_point(set: &FeasibleSet, rng: &mut Rng) -> Vec<f64> {
    let s = set.as_simplex().expect("simplex sets only");
    let w: Vec<f64> = (0..s.dim()).map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect();
    let total: f64 = w.iter().sum();
    let free = s.mass() - s.dim() as f64 * s.floor();
    w.iter().map(|v| s.floor() + free * v / total).collect()
}

/// The vertices of the floor simplex.
pub fn vertices(set: &FeasibleSet) -> Vec<Vec<f64>> {
    let s = set.as_simplex().expect("simplex sets only");
    let free = s.mass() - s.dim() as f64 * s.floor();
    (0..s.dim())
        .map(|i| {
            let mut v = vec![s.floor(); s.dim()];
            v[i] += free;
            v
        })
        .collect()
}

fn random_vector(n: usize, scale: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

/// Runs `sequences` prox recurrences `u₁ = x_ω`, `u_{τ+1} = Prox_{u_τ}(γ_τe_τ)`
/// on arbitrary vectors and returns the largest value of
/// `Σγ_τe_τᵀ(u_τ − y) − ½D² − Σγ_τ²‖e_τ‖*²/(2μ)` over the probed `y`
/// (random points and all vertices), relative to the right-hand side.
pub fn lemma3_worst(setup: &ProximalSetup, sequences: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let set = setup.set();
    let n = set.dim();
    let sc = setup.constants();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..sequences {
        let steps = rng.random_range(2..60);
        let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let mut u = sc.x_omega.clone();
        let mut terms = Vec::with_capacity(steps);
        let mut quad = 0.0;
        for _ in 0..steps {
            let e = random_vector(n, scale, &mut rng);
            let gamma = rng.random_range(0.0..1.0);
            quad += gamma * gamma * setup.dual_norm().of(&e).powi(2);
            let zeta: Vec<f64> = e.iter().map(|v| gamma * v).collect();
            let next = setup.prox(&u, &zeta).unwrap();
            terms.push((zeta, u));
            u = next;
        }
        let rhs = 0.5 * sc.d_omega * sc.d_omega + quad / (2.0 * sc.mu_omega);
        let mut probes: Vec<Vec<f64>> = (0..100).map(|_| random_point(set, &mut rng)).collect();
        probes.extend(vertices(set));
        for y in &probes {
            let lhs: f64 = terms
                .iter()
                .map(|(zeta, u)| zeta.iter().zip(u.iter().zip(y)).map(|(z, (a, b))| z * (a - b)).sum::<f64>())
                .sum();
            worst = worst.max((lhs - rhs) / rhs.max(1.0));
        }
    }
    worst
}

/// Largest violation of `ζᵀ(x₊ − y) ≤ V_x(y) − V_{x₊}(y) − V_x(x₊)` over
/// random triples.
pub fn three_point_worst(setup: &ProximalSetup, triples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let set = setup.set();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..triples {
        let x = random_point(set, &mut rng);
        let y = if rng.random_bool(0.2) {
            vertices(set)[rng.random_range(0..set.dim())].clone()
        } else {
            random_point(set, &mut rng)
        };
        let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
        let zeta = random_vector(set.dim(), scale, &mut rng);
        let xp = setup.prox(&x, &zeta).unwrap();
        let lhs: f64 = zeta.iter().zip(xp.iter().zip(&y)).map(|(z, (a, b))| z * (a - b)).sum();
        let rhs = setup.bregman(&x, &y) - setup.bregman(&xp, &y) - setup.bregman(&x, &xp);
        worst = worst.max(lhs - rhs);
    }
    worst
}

/// Minimizes `ω(y) + yᵀ(ζ − ω′(x))` over a three-coordinate floor simplex by
/// a zooming grid search.
pub fn grid_prox(setup: &ProximalSetup, x: &[f64], zeta: &[f64]) -> Vec<f64> {
    let s = setup.set().as_simplex().expect("simplex sets only");
    assert_eq!(s.dim(), 3);
    let (a, b) = (s.mass(), s.floor());
    let grad = setup.omega_grad(x);
    let lin: Vec<f64> = zeta.iter().zip(&grad).map(|(z, g)| z - g).collect();
    let objective = |y: &[f64]| setup.omega(y) + dot(y, &lin);
    let point = |u: f64, v: f64| [u, v, a - u - v];
    let feasible = |y: &[f64; 3]| y.iter().all(|&c| c >= b);
    let (mut cu, mut cv) = (a / 3.0, a / 3.0);
    let mut half = a;
    let cells = 100;
    while half > 1e-10 {
        let mut best = (f64::INFINITY, cu, cv);
        for i in 0..=cells {
            for j in 0..=cells {
                let u = (cu - half + 2.0 * half * i as f64 / cells as f64).max(b);
                let v = (cv - half + 2.0 * half * j as f64 / cells as f64).max(b);
                let y = point(u, v);
                if !feasible(&y) {
                    continue;
                }
                let val = objective(&y);
                if val < best.0 {
                    best = (val, u, v);
                }
            }
        }
        (cu, cv) = (best.1, best.2);
        half /= 10.0;
    }
    point(cu, cv).to_vec()
}

/// Largest ‖·‖∞ distance between the closed-form prox and the grid minimizer
/// over random `(x, ζ)` on a three-coordinate set.
pub fn prox_grid_worst(setup: &ProximalSetup, probes: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = random_point(setup.set(), &mut rng);
        let zeta = random_vector(3, 2.0, &mut rng);
        let got = setup.prox(&x, &zeta).unwrap();
        let want = grid_prox(setup, &x, &zeta);
        worst = worst.max(Norm::Linf.dist(&got, &want));
    }
    worst
}

/// Empirical tail probabilities `P(Σ_τ η_τ > Θ√N)` of a martingale with
/// increments `η_τ = σ_τε_τ`: ε_τ are Rademacher signs and the predictable
/// scale `σ_τ ∈ {½, 1}` depends on the sign of the running sum, so that
/// `E[η_τ | past] = 0` and `E[exp(η_τ²) | past] ≤ e`.
pub fn lemma2_tails(steps: usize, trials: usize, thetas: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut hits = vec![0usize; thetas.len()];
    let root = (steps as f64).sqrt();
    for _ in 0..trials {
        let mut sum = 0.0;
        for _ in 0..steps {
            let scale = if sum >= 0.0 { 1.0 } else { 0.5 };
            sum += if rng.random_bool(0.5) { scale } else { -scale };
        }
        for (h, t) in hits.iter_mut().zip(thetas) {
            if sum > t * root {
                *h += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / trials as f64).collect()
}

/// Outcome of the solution-bound experiment.
pub struct SolutionBound {
    pub setup: &'static str,
    pub mean: f64,
    pub bound: f64,
}

/// Mean of `‖x^N − x*‖^ρ` over `seeds` runs of mirror descent with its own
/// stepsize on the quadratic instance with `λ₀ > 0`, next to the bound.
pub fn solution_bound_runs(n: usize, budget: usize, seeds: u64, lambda0: f64) -> Vec<SolutionBound> {
    let mut out = Vec::new();
    for norm in [Norm::L1, Norm::L2] {
        let inst = gen_instance1(n, 0.1, 0.9, lambda0, 1.0, 0.0, norm, 17).unwrap();
        let setup = match norm {
            Norm::L1 => ProximalSetup::entropy(inst.set()).unwrap(),
            _ => ProximalSetup::euclidean(inst.set()).unwrap(),
        };
        let sheet = inst.constants().clone();
        let (rho, _) = sheet.uniform_convexity().unwrap();
        let optimum = inst.exact_optimum(1e-10).unwrap();
        let mut total = 0.0;
        for s in 0..seeds {
            let run = smd_run(&inst, &setup, &SolverConfig::new(budget, derive_seed(5, &[s]))).unwrap();
            total += norm.dist(&run.x_avg, &optimum.x).powf(rho);
        }
        out.push(SolutionBound {
            setup: setup.name(),
            mean: total / seeds as f64,
            bound: mirror_bounds::bounds::solution_bound_smd(&sheet, &setup, budget).unwrap(),
        });
    }
    out
}

/// Worst observations of the lifted CVaR problem against its closed form.
pub struct LiftedCheck {
    /// Largest value or subgradient difference to the closed-form oracle.
    pub oracle_diff: f64,
    /// Largest relative duality gap of the second-stage LPs.
    pub max_gap: f64,
    /// Largest violation of `Q(x₁) ≥ Q(x₀) + sᵀ(x₁ − x₀)`.
    pub subgradient_violation: f64,
}

/// Compares the lifted mean-CVaR problem with the closed-form integrand on
/// `probes` random points and draws, including points on the kink.
pub fn lifted_cvar_check(probes: usize, seed: u64) -> LiftedCheck {
    let (a0, a1, eps) = (0.9, 0.1, 0.2);
    let inst = gen_instance2(8, a0, a1, eps, 0.0, 1000, seed).unwrap();
    let model = Eprm::new(mean_cvar_as_eprm(a0, a1, eps, 1.0).unwrap()).unwrap();
    let lifted = eprm_reformulate(model, LinearLoss::from_cvar(&inst).unwrap()).unwrap();
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let dim = lifted.set().dim();
    let random_lifted = |rng: &mut Rng| {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        lifted.set().project(&raw).unwrap()
    };
    let mut check = LiftedCheck {
        oracle_diff: 0.0,
        max_gap: 0.0,
        subgradient_violation: f64::NEG_INFINITY,
    };
    for k in 0..probes {
        let mut x0 = random_lifted(&mut rng);
        let x1 = random_lifted(&mut rng);
        let xi = inst.sample(&mut rng);
        let z = dot(&xi, &x0[1..]);
        if k % 10 == 0 {
            x0[0] = z.clamp(-1.0, 1.0);
        }
        let want = inst.oracle(&x0, &xi).unwrap();
        let got = lifted.oracle(&x0, &xi).unwrap();
        check.oracle_diff = check.oracle_diff.max((want.value - got.value).abs());
        for (a, b) in want.subgradient.iter().zip(&got.subgradient) {
            check.oracle_diff = check.oracle_diff.max((a - b).abs());
        }
        let stage = lifted.eprm().second_stage(&x0[..1], z).unwrap();
        check.max_gap = check.max_gap.max(stage.certificate.gap / (1.0 + stage.value.abs()));
        let at1 = lifted.oracle(&x1, &xi).unwrap();
        let step: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let violation = got.value + dot(&got.subgradient, &step) - at1.value;
        check.subgradient_violation = check.subgradient_violation.max(violation);
    }
    check
}
