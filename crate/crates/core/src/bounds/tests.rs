use super::*;
use crate::linalg::Norm;
use crate::problem::StochasticProblem;
use crate::problems::{gen_instance1, QuadraticInstance};
use crate::solvers::{msmd_ball_run, rsa_run, smd_run, SolverConfig};

#[test]
fn closed_form_thetas() {
    let (t1, t2, t3) = calibrate_thetas_smd1(0.1).unwrap();
    assert!((t1 - 2.0 * 20f64.ln().sqrt()).abs() < 1e-12);
    assert!((t3 - 2.0 * 40f64.ln().sqrt()).abs() < 1e-12);
    assert!((t1 - 3.461_636_765_204_571).abs() < 1e-12 && (t3 - 3.841_291_165_279_683).abs() < 1e-12);
    assert!((smd1_theta2_map(t2) - 0.025).abs() <= 1e-12);
    assert!((t2 - 3.841_313_275_927_919).abs() < 1e-9);
}

#[test]
fn second_kind_theta_meets_its_target() {
    for (alpha, n) in [(0.1, 1000), (0.05, 10), (0.01, 100_000)] {
        let t = calibrate_theta_smd2(alpha, n).unwrap();
        assert!((smd2_theta_map(t, n) - alpha / 2.0).abs() <= 1e-12);
    }
}

#[test]
fn alpha_out_of_range_is_rejected() {
    for a in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(calibrate_thetas_smd1(a).is_err());
        assert!(calibrate_theta_smd2(a, 10).is_err());
    }
}

/// Second, independent evaluation of the mirror descent constants.
fn k_by_hand(l: f64, m1: f64, m2: f64, d: f64, mu: f64) -> (f64, f64) {
    let s = 2.0 * (m2 * m2 + l * l) * mu;
    let k1 = d * (m2 * m2 + 2.0 * l * l) / s.sqrt();
    let k2 = d * m2 * m2 / s.sqrt() + 2.0 * d * m2 / mu.sqrt() + m1;
    (k1, k2)
}

#[test]
fn k_constants_match_an_independent_evaluation() {
    let inst = gen_instance1(40, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 1).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let (k1, k2) = k_constants_smd(inst.constants(), &setup);
    let d = (2.0 * 40f64.ln()).sqrt();
    let (h1, h2) = k_by_hand(1.0, 0.65, 1.1, d, 1.0);
    assert!((k1 - h1).abs() < 1e-12 && (k2 - h2).abs() < 1e-12);
    let (r1, r2) = k_constants_rsa(inst.constants(), d);
    assert!((r1 - h1).abs() < 1e-12 && (r2 - h2).abs() < 1e-12);
}

fn entropy_run(n: usize, budget: usize, seed: u64) -> (QuadraticInstance, ProximalSetup, RunRecord) {
    let inst = gen_instance1(n, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 7).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(budget, seed)).unwrap();
    (inst, setup, run)
}

#[test]
fn first_kind_interval_follows_the_formulas() {
    let (inst, setup, run) = entropy_run(20, 400, 3);
    let ci = ci_smd1(&run, inst.constants(), &setup, 0.1).unwrap();
    let c = inst.constants();
    let (t1, t2, t3) = calibrate_thetas_smd1(0.1).unwrap();
    let (k1, k2) = k_constants_smd(c, &setup);
    let sn = 20.0;
    assert!((ci.high - (run.g_avg + t1 * c.m1 / sn)).abs() < 1e-14);
    let low = run.g_avg - (k1 + t2 * (k2 - c.m1)) / sn - t3 * c.m1 / sn;
    assert!((ci.low - low).abs() < 1e-14);
    assert!(ci.low <= run.g_avg && run.g_avg <= ci.high);
    assert!((ci.level - 0.9).abs() < 1e-9);
}

#[test]
fn first_kind_refuses_step_overrides_and_multistep_runs() {
    let (inst, setup, _) = entropy_run(10, 100, 3);
    let run = smd_run(&inst, &setup, &SolverConfig::new(100, 3).with_step(0.1)).unwrap();
    assert!(matches!(ci_smd1(&run, inst.constants(), &setup, 0.1), Err(Error::InvalidMethod(_))));
    let pnorm = ProximalSetup::pnorm(inst.set()).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(100, 3)).unwrap();
    assert!(matches!(ci_smd1(&run, inst.constants(), &pnorm, 0.1), Err(Error::InvalidMethod(_))));
}

#[test]
fn first_kind_width_scales_like_inverse_root_n() {
    let (inst, setup, _) = entropy_run(10, 100, 3);
    let widths: Vec<f64> = [1000, 4000, 16000]
        .iter()
        .map(|&n| {
            let run = smd_run(&inst, &setup, &SolverConfig::new(n, 1)).unwrap();
            ci_smd1(&run, inst.constants(), &setup, 0.1).unwrap().width() * (n as f64).sqrt()
        })
        .collect();
    assert!(widths.iter().all(|w| (w / widths[0] - 1.0).abs() < 1e-12));
}

#[test]
fn rsa_interval_uses_the_run_distance() {
    let inst = gen_instance1(10, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L2, 3).unwrap();
    let setup = ProximalSetup::euclidean(inst.set()).unwrap();
    let mut start = vec![0.0; 10];
    start[0] = 1.0;
    let run = rsa_run(&inst, &SolverConfig::new(500, 2).with_start(start)).unwrap();
    assert!((run.d_x - 2f64.sqrt()).abs() < 1e-12);
    let ci = ci_smd1(&run, inst.constants(), &setup, 0.1).unwrap();
    assert_eq!(ci.constants[0], k_constants_rsa(inst.constants(), run.d_x).0);
}

#[test]
fn second_kind_interval_follows_the_formulas() {
    let (inst, setup, _) = entropy_run(20, 100, 3);
    let c = inst.constants();
    let n = 900;
    let gamma = theta_step(c, &setup, 1.0, n).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(n, 4).with_step(gamma)).unwrap();
    let ci = ci_smd2(&run, c, &setup, 0.1, 1.0).unwrap();
    let t2 = calibrate_theta_smd2(0.1, n).unwrap();
    let d = setup.constants().d_omega;
    let ms = c.m_star.unwrap();
    let f_low = run.model.lower_bound(inst.set()).unwrap();
    let low = f_low - ((0.5 + 2.0) * d * ms + t2 * (c.m1 + (8.0 + 2.0 / 30.0) * d * ms)) / 30.0;
    assert!((ci.low - low).abs() < 1e-13);
    let wrong = smd_run(&inst, &setup, &SolverConfig::new(n, 4)).unwrap();
    assert!(matches!(ci_smd2(&wrong, c, &setup, 0.1, 1.0), Err(Error::InvalidMethod(_))));
}

#[test]
fn affine_lower_model_beats_random_feasible_points() {
    use crate::seeds::rng_from_seed;
    use rand::Rng;
    let (inst, _, run) = entropy_run(5, 300, 9);
    let lb = run.model.lower_bound(inst.set()).unwrap();
    let n = run.model.count as f64;
    let mut rng = rng_from_seed(1);
    for _ in 0..100_000 {
        let mut x: Vec<f64> = (0..5).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        let val = (run.model.sum_value - run.model.sum_grad_dot_x + crate::linalg::dot(&run.model.sum_grad, &x)) / n;
        assert!(lb <= val + 1e-12);
    }
}

#[test]
fn asymptotic_interval_and_its_degenerate_case() {
    let saa = SaaSolution {
        x: vec![1.0],
        value: 2.0,
        sigma: 3.0,
        gap: 0.0,
        values: vec![0.0; 100],
    };
    let ci = ci_asymptotic(&saa, 0.1).unwrap();
    assert!((ci.high - (2.0 + 1.644_853_626_951_472 * 0.3)).abs() < 1e-9);
    assert!(!ci.degenerate);
    let flat = SaaSolution { sigma: 0.0, ..saa };
    let ci = ci_asymptotic(&flat, 0.1).unwrap();
    assert!(ci.degenerate && ci.low == 2.0 && ci.high == 2.0);
}

#[test]
fn multistep_interval_checks_the_sizing_rule() {
    let inst = gen_instance1(8, 0.1, 0.9, 4.0, 1.0, 0.0, Norm::L2, 6).unwrap();
    let setup = ProximalSetup::euclidean(inst.set()).unwrap();
    let run = msmd_ball_run(&inst, &setup, 2, 2.0, &SolverConfig::new(2, 1)).unwrap();
    let ci = ci_multistep(&run, inst.constants(), &setup, 2.0).unwrap();
    assert!(ci.contains(run.g_avg));
    assert!(ci_multistep(&run, inst.constants(), &setup, 50.0).is_err());
}
