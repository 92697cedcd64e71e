//! Acceptance run: one PASS/FAIL line per criterion, followed by the
//! measurements behind it. The process exits with status 1 when any
//! criterion fails.

mod common;

use std::time::Instant;

use mirror_bounds::bounds::{
    calibrate_theta_smd2, calibrate_thetas_smd1, mean_error_bound_smd, normal_quantile, smd1_theta2_map,
    smd2_theta_map,
};
use mirror_bounds::harness::{run_coverage, run_trajectory_compare, ExperimentConfig, ExperimentKind, GridPoint, InstanceSpec};
use mirror_bounds::problem::StochasticProblem;
use mirror_bounds::problems::gen_instance1;
use mirror_bounds::prox::{ProximalSetup, SetupKind};
use mirror_bounds::seeds::derive_seed;
use mirror_bounds::solvers::{smd_run, SolverConfig};
use mirror_bounds::Norm;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
    seconds: f64,
}

fn run(id: &'static str, title: &'static str, f: impl FnOnce(&mut Vec<String>) -> bool) -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let pass = f(&mut details);
    Outcome {
        id,
        title,
        pass,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn quadratic(lambda0: f64) -> InstanceSpec {
    InstanceSpec::Quadratic {
        alpha0: 0.1,
        alpha1: 0.9,
        lambda0,
        a: 1.0,
        b: 0.0,
    }
}

/// Criteria 1 to 3 share one coverage study: 250 replications per cell, of
/// which the 20% with the smallest asymptotic intervals are discarded.
fn coverage_criteria() -> Vec<Outcome> {
    let start = Instant::now();
    let mut config = ExperimentConfig::coverage(
        quadratic(0.0),
        vec![GridPoint { n: 40, budget: 1000 }, GridPoint { n: 100, budget: 1000 }],
        250,
    );
    config.kind = ExperimentKind::WidthSweep;
    config.thetas = vec![1.0, 0.005];
    config.setup = SetupKind::Entropy;
    let report = match run_coverage(&config) {
        Ok(r) => r,
        Err(e) => {
            return ["1", "2", "3"]
                .into_iter()
                .map(|id| Outcome {
                    id,
                    title: "coverage study",
                    pass: false,
                    details: vec![format!("coverage study failed: {e}")],
                    seconds: 0.0,
                })
                .collect()
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    let mut one = Vec::new();
    let mut two = Vec::new();
    let mut three = Vec::new();
    let (mut pass1, mut pass2, mut pass3) = (true, true, true);
    for cell in &report.cells {
        let (n, budget) = (cell.point.n, cell.point.budget);
        let kept = cell.kept.len();
        pass1 &= kept == 200;
        for (method, theta) in [("smd1", None), ("smd2", Some(1.0)), ("smd2", Some(0.005))] {
            let row = cell.coverage_of(method, theta).expect("coverage row");
            pass1 &= row.coverage == 1.0;
            one.push(format!(
                "(n, N) = ({n}, {budget}) {method} θ = {theta:?}: coverage {:.3} over {} kept of {} ({} failed)",
                row.coverage,
                row.replications,
                cell.replications.len() + cell.failures.len(),
                cell.failures.len()
            ));
        }
        let asym = cell.coverage_of("asymptotic", None).expect("asymptotic row");
        let (target, tol) = if n == 40 { (0.82, 0.10) } else { (0.46, 0.12) };
        let ok = (asym.coverage - target).abs() <= tol;
        pass2 &= ok;
        two.push(format!(
            "(n, N) = ({n}, {budget}): asymptotic coverage {:.3}, required {target} ± {tol}",
            asym.coverage
        ));
        for (theta, lo, hi) in [(1.0, 3.6, 4.1), (0.005, 10.0, 12.0)] {
            let ratio = cell.ratio_of("smd2", "smd1", Some(theta)).expect("ratio row").mean_ratio;
            if n == 40 {
                pass3 &= (lo..=hi).contains(&ratio);
                three.push(format!(
                    "(n, N) = ({n}, {budget}) θ = {theta}: mean width ratio smd2/smd1 {ratio:.3}, required [{lo}, {hi}]"
                ));
            } else {
                three.push(format!("(n, N) = ({n}, {budget}) θ = {theta}: mean width ratio {ratio:.3} (informative)"));
            }
        }
    }
    one.push(format!("coverage study wall time {seconds:.1} s"));
    vec![
        Outcome {
            id: "1",
            title: "nonasymptotic intervals cover the optimum in every kept replication",
            pass: pass1,
            details: one,
            seconds,
        },
        Outcome {
            id: "2",
            title: "asymptotic interval under-covers as expected",
            pass: pass2,
            details: two,
            seconds: 0.0,
        },
        Outcome {
            id: "3",
            title: "width ratio of the second to the first interval",
            pass: pass3,
            details: three,
            seconds: 0.0,
        },
    ]
}

fn mean_error_bounds(details: &mut Vec<String>) -> bool {
    let mut pass = true;
    for n in [40, 100] {
        for budget in [1_000, 10_000] {
            let mut total = 0.0;
            let mut bound = 0.0;
            for seed in 0..50u64 {
                let s = derive_seed(4, &[n as u64, budget as u64, seed]);
                let inst = gen_instance1(n, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, derive_seed(s, &[0])).unwrap();
                let setup = ProximalSetup::entropy(inst.set()).unwrap();
                let f_star = inst.exact_optimum(1e-10).unwrap().value;
                let run = smd_run(&inst, &setup, &SolverConfig::new(budget, derive_seed(s, &[1]))).unwrap();
                total += (run.g_avg - f_star).abs();
                bound = mean_error_bound_smd(inst.constants(), &setup, budget);
            }
            let mean = total / 50.0;
            pass &= mean <= bound;
            details.push(format!("n = {n}, N = {budget}: mean |g^N − f*| = {mean:.3e}, bound {bound:.3e}"));
        }
    }
    pass
}

fn multistep_dominance(details: &mut Vec<String>) -> bool {
    let mut config = ExperimentConfig::coverage(
        quadratic(4.0),
        vec![GridPoint { n: 50, budget: 1000 }, GridPoint { n: 100, budget: 5000 }],
        50,
    );
    config.kind = ExperimentKind::TrajectoryCompare;
    let report = match run_trajectory_compare(&config) {
        Ok(r) => r,
        Err(e) => {
            details.push(format!("comparison failed: {e}"));
            return false;
        }
    };
    let mut pass = true;
    for cell in &report.cells {
        let steps = &cell.schedule.steps;
        let (first, last) = (steps[0], *steps.last().unwrap());
        let ok = cell.mssmd_mean_final_f <= cell.smd_mean_final_f && first > cell.smd_step && last < cell.smd_step;
        pass &= ok;
        details.push(format!(
            "(N, n) = ({}, {}): f* = {:.4}, mean final f SMD {:.4}, multistep {:.4}; \
             SMD step {:.3e}, multistep steps {:?} over stages {:?}",
            cell.point.budget,
            cell.point.n,
            cell.f_star,
            cell.smd_mean_final_f,
            cell.mssmd_mean_final_f,
            cell.smd_step,
            steps.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>(),
            cell.schedule.counts,
        ));
    }
    pass
}

fn property_suites(details: &mut Vec<String>) -> bool {
    let mut pass = true;
    for (k, setup) in common::setups(6).iter().enumerate() {
        let worst = common::lemma3_worst(setup, 100, 10 + k as u64);
        pass &= worst <= 1e-9;
        details.push(format!(
            "(a) {}: 100 sequences, worst (lhs − rhs)/max(rhs, 1) = {worst:.3e}",
            setup.name()
        ));
    }
    for (k, setup) in common::setups(6).iter().enumerate() {
        let worst = common::three_point_worst(setup, 1000, 20 + k as u64);
        pass &= worst <= 1e-8;
        details.push(format!("(b) {}: 1000 triples, worst violation {worst:.3e} (tolerance 1e-8)", setup.name()));
    }
    let thetas = [1.0, 2.0, 3.0];
    let tails = common::lemma2_tails(100, 100_000, &thetas, 3);
    for (t, p) in thetas.iter().zip(&tails) {
        let bound = (-t * t / 4.0).exp();
        pass &= *p <= bound;
        details.push(format!("(c) Θ = {t}: empirical tail {p:.5}, bound {bound:.5} (N = 100, 1e5 trials)"));
    }
    let simplex = mirror_bounds::FeasibleSet::Simplex(mirror_bounds::sets::FloorSimplex::probability(3).unwrap());
    let floor = mirror_bounds::FeasibleSet::Simplex(mirror_bounds::sets::FloorSimplex::new(3, 1.0, 0.1).unwrap());
    for (setup, seed) in [
        (ProximalSetup::entropy(&simplex).unwrap(), 1),
        (ProximalSetup::pnorm(&floor).unwrap(), 2),
    ] {
        let worst = common::prox_grid_worst(&setup, 100, seed);
        pass &= worst <= 1e-4;
        details.push(format!("(d) {}: 100 probes, worst distance to grid minimizer {worst:.3e}", setup.name()));
    }
    for budget in [1_000, 10_000] {
        for row in common::solution_bound_runs(20, budget, 50, 4.0) {
            pass &= row.mean <= row.bound;
            details.push(format!(
                "(e) {} N = {budget}: mean ‖x^N − x*‖^ρ = {:.3e}, bound {:.3e}",
                row.setup, row.mean, row.bound
            ));
        }
    }
    pass
}

fn eprm_keystone(details: &mut Vec<String>) -> bool {
    let check = common::lifted_cvar_check(1000, 12);
    details.push(format!("lifted vs closed form: worst difference {:.3e} (tolerance 1e-9)", check.oracle_diff));
    details.push(format!("second-stage LPs: worst relative duality gap {:.3e} (tolerance 1e-8)", check.max_gap));
    details.push(format!(
        "subgradient inequality: worst violation {:.3e} (tolerance 1e-7)",
        check.subgradient_violation
    ));
    check.oracle_diff <= 1e-9 && check.max_gap <= 1e-8 && check.subgradient_violation <= 1e-7
}

/// `Φ⁻¹(p)` by bisection on `Φ(x) = ½erfc(−x/√2)`.
fn quantile_by_bisection(p: f64) -> f64 {
    let cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn calibration(details: &mut Vec<String>) -> bool {
    let mut pass = true;
    let (mut closed, mut smd1, mut smd2) = (0.0f64, 0.0f64, 0.0f64);
    for alpha in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let (t1, t2, t3) = calibrate_thetas_smd1(alpha).unwrap();
        // Θ₁ and Θ₃ are the roots of e^{−Θ²/4} = α/2 and α/4.
        closed = closed
            .max(((-t1 * t1 / 4.0).exp() - alpha / 2.0).abs())
            .max(((-t3 * t3 / 4.0).exp() - alpha / 4.0).abs())
            .max((t1 - 2.0 * (2.0 / alpha).ln().sqrt()).abs())
            .max((t3 - 2.0 * (4.0 / alpha).ln().sqrt()).abs());
        smd1 = smd1.max((smd1_theta2_map(t2) - alpha / 4.0).abs());
        for n in [100, 1_000, 10_000] {
            let t = calibrate_theta_smd2(alpha, n).unwrap();
            smd2 = smd2.max((smd2_theta_map(t, n) - alpha / 2.0).abs());
        }
    }
    pass &= closed <= 1e-12 && smd1 <= 1e-12 && smd2 <= 1e-12;
    details.push(format!("Θ₁, Θ₃ closed forms: worst residual {closed:.3e}"));
    details.push(format!("first-kind Θ₂ equation: worst residual {smd1:.3e}"));
    details.push(format!("second-kind Θ equation: worst residual {smd2:.3e}"));
    let mut worst = 0.0f64;
    let mut probes = Vec::new();
    for k in 1..=999 {
        probes.push(k as f64 / 1000.0);
    }
    for e in 3..=6 {
        let p = 10f64.powi(-e);
        probes.extend([p, 2.5 * p, 1.0 - p, 1.0 - 2.5 * p]);
    }
    for &p in &probes {
        worst = worst.max((normal_quantile(p).unwrap() - quantile_by_bisection(p)).abs());
    }
    pass &= worst < 1e-6;
    details.push(format!("normal quantile: worst error {worst:.3e} over {} probes", probes.len()));
    pass
}

fn main() {
    let mut outcomes = coverage_criteria();
    outcomes.push(run("4", "mean error stays below the bound", mean_error_bounds));
    outcomes.push(run("5", "multistep method beats single-stage mirror descent", multistep_dominance));
    outcomes.push(run("6", "property suites", property_suites));
    outcomes.push(run("7", "risk-measure reformulation", eprm_keystone));
    outcomes.push(run("8", "calibration exactness", calibration));
    outcomes.sort_by_key(|o| o.id);

    println!();
    for o in &outcomes {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {} ({:.1} s)", o.id, o.title, o.seconds);
        for d in &o.details {
            println!("     {d}");
        }
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("\nacceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
