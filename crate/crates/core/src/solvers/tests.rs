use rand::RngCore;

use super::*;
use crate::error::{Error, Result};
use crate::linalg::{dot, Norm};
use crate::problem::{ConstantSheet, Draw, StochasticProblem};
use crate::problems::gen_instance1;
use crate::prox::ProximalSetup;
use crate::sets::{FeasibleSet, FloorSimplex};

/// `g(x, ξ) = cᵀx` with no noise.
struct Linear {
    set: FeasibleSet,
    sheet: ConstantSheet,
    c: Vec<f64>,
}

impl Linear {
    fn new(c: Vec<f64>, norm: Norm) -> Self {
        let n = c.len();
        let set = FeasibleSet::Simplex(FloorSimplex::probability(n).unwrap());
        let d_x = set.max_distance(&set.start_point(), norm);
        Linear {
            set,
            sheet: ConstantSheet {
                l: 1.0,
                m1: 1.0,
                m2: 1.0,
                m_star: Some(1.0),
                d_x,
                norm,
                rho: Some(2.0),
                mu_f: Some(1.0),
            },
            c,
        }
    }
}

impl StochasticProblem for Linear {
    fn name(&self) -> &str {
        "linear"
    }
    fn set(&self) -> &FeasibleSet {
        &self.set
    }
    fn constants(&self) -> &ConstantSheet {
        &self.sheet
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Draw {
        vec![rng.next_u32() as f64]
    }
    fn eval_into(&self, x: &[f64], _xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        grad.copy_from_slice(&self.c);
        Ok(dot(&self.c, x))
    }
    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(dot(&self.c, x))
    }
}

fn schedule_sheet(sum_sq: f64) -> ConstantSheet {
    let half = (sum_sq / 2.0).sqrt();
    ConstantSheet {
        l: half,
        m1: 1.0,
        m2: half,
        m_star: Some(half),
        d_x: 2f64.sqrt(),
        norm: Norm::L2,
        rho: Some(2.0),
        mu_f: Some(1.0),
    }
}

#[test]
fn two_step_hand_trace() {
    let p = Linear::new(vec![1.0, 0.0], Norm::L2);
    let gamma = 0.5;
    let cfg = SolverConfig::new(2, 0).with_step(gamma).with_start(vec![1.0, 0.0]).with_stride(1);
    let run = rsa_run(&p, &cfg).unwrap();
    assert_eq!(run.oracle_calls, 2);
    // Π((1 − γ, 0)) = (1 − γ/2, γ/2): a move toward (0, 1).
    let x2 = &run.trace[1].x;
    assert!((x2[0] - 0.75).abs() < 1e-15 && (x2[1] - 0.25).abs() < 1e-15);
    assert!((run.g_avg - (1.0 + 0.75) / 2.0).abs() < 1e-15);
}

#[test]
fn zero_or_negative_step_override_is_rejected() {
    let p = Linear::new(vec![1.0, 0.0], Norm::L2);
    for g in [0.0, -1.0, f64::NAN] {
        let err = rsa_run(&p, &SolverConfig::new(10, 0).with_step(g)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
    assert!(rsa_run(&p, &SolverConfig::new(1, 0)).is_err());
}

#[test]
fn euclidean_smd_is_rsa() {
    let inst = gen_instance1(10, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L2, 3).unwrap();
    let setup = ProximalSetup::euclidean(inst.set()).unwrap();
    let start = inst.set().start_point();
    let cfg = SolverConfig::new(200, 11).with_step(0.05).with_start(start).with_stride(7);
    let a = rsa_run(&inst, &cfg).unwrap();
    let b = smd_run(&inst, &setup, &cfg).unwrap();
    assert_eq!(a.x_avg, b.x_avg);
    assert_eq!(a.values, b.values);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.g_avg, b.g_avg);
}

#[test]
fn runs_are_reproducible_and_account_for_the_budget() {
    let inst = gen_instance1(20, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 5).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let cfg = SolverConfig::new(500, 42).with_stride(50);
    let a = smd_run(&inst, &setup, &cfg).unwrap();
    let b = smd_run(&inst, &setup, &cfg).unwrap();
    assert!(a.same_outcome(&b));
    assert_eq!(a.oracle_calls, 500);
    assert_eq!(a.model.count, 500);
    let c = smd_run(&inst, &setup, &SolverConfig::new(500, 43)).unwrap();
    assert_ne!(a.values, c.values);
    // g^N recomputed from the stored values and steps.
    let w: f64 = a.steps.iter().sum();
    let g: f64 = a.steps.iter().zip(&a.values).map(|(s, v)| s * v).sum::<f64>() / w;
    assert!((g - a.g_avg).abs() <= 1e-12 * g.abs().max(1.0));
}

#[test]
fn entropy_average_stays_on_the_simplex() {
    let inst = gen_instance1(100, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 9).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(1000, 1)).unwrap();
    let sum: f64 = run.x_avg.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9 && run.x_avg.iter().all(|&v| v >= 0.0));
}

#[test]
fn averaging_is_below_the_average_objective() {
    let inst = gen_instance1(15, 0.1, 0.9, 1.0, 1.0, 0.0, Norm::L1, 2).unwrap();
    let setup = ProximalSetup::pnorm(inst.set()).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(300, 8).with_stride(1)).unwrap();
    let w: f64 = run.steps.iter().sum();
    let avg_f: f64 = run
        .trace
        .iter()
        .zip(&run.steps)
        .map(|(t, s)| s * inst.objective(&t.x).unwrap())
        .sum::<f64>()
        / w;
    assert!(inst.objective(&run.x_avg).unwrap() <= avg_f + 1e-10);
}

#[test]
fn setup_and_sheet_must_match() {
    let inst = gen_instance1(10, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 3).unwrap();
    let euclid = ProximalSetup::euclidean(inst.set()).unwrap();
    assert!(smd_run(&inst, &euclid, &SolverConfig::new(10, 0)).is_err());
    assert!(rsa_run(&inst, &SolverConfig::new(10, 0)).is_err());
    let other = FeasibleSet::Simplex(FloorSimplex::probability(11).unwrap());
    let entropy = ProximalSetup::entropy(&other).unwrap();
    assert!(smd_run(&inst, &entropy, &SolverConfig::new(10, 0)).is_err());
}

#[test]
fn supplied_draws_must_cover_the_budget() {
    let inst = gen_instance1(5, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L2, 3).unwrap();
    let draws: Vec<Draw> = vec![vec![1.0; 5]; 9];
    assert!(rsa_run_with_draws(&inst, &SolverConfig::new(10, 0), &draws).is_err());
    let run = rsa_run_with_draws(&inst, &SolverConfig::new(9, 0), &draws).unwrap();
    assert_eq!(run.seed, None);
}

#[test]
fn affine_model_lower_bound_is_an_lmo_value() {
    let inst = gen_instance1(6, 0.1, 0.9, 0.0, 1.0, 0.0, Norm::L1, 4).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let run = smd_run(&inst, &setup, &SolverConfig::new(100, 3)).unwrap();
    let lb = run.model.lower_bound(inst.set()).unwrap();
    let n = run.model.count as f64;
    let at = |x: &[f64]| (run.model.sum_value - run.model.sum_grad_dot_x + dot(&run.model.sum_grad, x)) / n;
    for i in 0..6 {
        let mut e = vec![0.0; 6];
        e[i] = 1.0;
        assert!(lb <= at(&e) + 1e-12);
    }
}

#[test]
fn schedule_matches_hand_evaluation() {
    let sheet = schedule_sheet(1.0);
    let set = FeasibleSet::Simplex(FloorSimplex::probability(3).unwrap());
    let setup = ProximalSetup::euclidean(&set).unwrap();
    let s = msmd_schedule(&sheet, &setup, 3).unwrap();
    assert_eq!(s.counts, vec![5, 9, 17]);
    assert!((s.steps[0] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    assert!(s.steps.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(s.total_calls(), 4 + 8 + 16);
    assert_eq!(s.beta, 1.0);
    let long = msmd_schedule(&sheet, &setup, 12).unwrap();
    let ratio = long.counts[11] as f64 / long.counts[10] as f64;
    assert!((ratio - 2.0).abs() < 1e-3);
}

#[test]
fn budget_constant_matches_hand_evaluation() {
    let sheet = schedule_sheet(2516.0);
    let set = FeasibleSet::Simplex(FloorSimplex::probability(3).unwrap());
    let setup = ProximalSetup::euclidean(&set).unwrap();
    let s = msmd_schedule(&sheet, &setup, 1).unwrap();
    assert!((s.a_const - 10064.0).abs() < 1e-9);
}

#[test]
fn ball_constant_matches_hand_evaluation() {
    let mut sheet = schedule_sheet(2.0);
    sheet.d_x = 1.0;
    let set = FeasibleSet::Simplex(FloorSimplex::probability(3).unwrap());
    let setup = ProximalSetup::euclidean(&set).unwrap();
    let (k1, k2) = ball_constants(&sheet, &setup).unwrap();
    assert!((k1 - 1.5).abs() < 1e-15);
    assert!((k2 - (0.5 + 2.0)).abs() < 1e-15);
}

#[test]
fn entropy_setup_has_no_quadratic_growth_constant() {
    let inst = gen_instance1(10, 0.1, 0.9, 1.0, 1.0, 0.0, Norm::L1, 3).unwrap();
    let setup = ProximalSetup::entropy(inst.set()).unwrap();
    let err = msmd_run(&inst, &setup, 2, &SolverConfig::new(2, 0)).unwrap_err();
    assert!(matches!(err, Error::MissingConstant(_)));
}

fn multistep_problem() -> (crate::problems::QuadraticInstance, ProximalSetup) {
    let inst = gen_instance1(8, 0.1, 0.9, 4.0, 1.0, 0.0, Norm::L2, 6).unwrap();
    let sheet = schedule_sheet(1.0);
    let inst = inst.with_constants(sheet).unwrap();
    let setup = ProximalSetup::euclidean(inst.set()).unwrap();
    (inst, setup)
}

#[test]
fn one_stage_multistep_is_one_smd_run() {
    let (inst, setup) = multistep_problem();
    let cfg = SolverConfig::new(2, 17);
    let ms = msmd_run(&inst, &setup, 1, &cfg).unwrap();
    let sched = ms.schedule.clone().unwrap();
    let single = SolverConfig::new(sched.counts[0] - 1, 17).with_step(sched.steps[0]);
    let sd = smd_run(&inst, &setup, &single).unwrap();
    assert_eq!(ms.x_avg, sd.x_avg);
    assert_eq!(ms.values, sd.values);
}

#[test]
fn multistep_chains_stage_outputs() {
    let (inst, setup) = multistep_problem();
    let run = msmd_run(&inst, &setup, 4, &SolverConfig::new(2, 1)).unwrap();
    let sched = run.schedule.as_ref().unwrap();
    assert_eq!(run.oracle_calls, sched.total_calls());
    assert_eq!(run.stages.len(), 4);
    for w in run.stages.windows(2) {
        assert_eq!(w[0].x_avg, w[1].start);
    }
    assert_eq!(run.stages[3].x_avg, run.x_avg);
    assert_eq!(run.model.count, sched.counts[3] - 1);
}

#[test]
fn budget_run_completes_whole_stages() {
    let (inst, setup) = multistep_problem();
    let sched = msmd_schedule(inst.constants(), &setup, 5).unwrap();
    let mut cum = 0;
    for (k, n) in sched.counts.iter().enumerate() {
        cum += n - 1;
        for budget in [cum, cum + 1] {
            let run = msmd_budget_run(&inst, &setup, &SolverConfig::new(budget, 2)).unwrap();
            assert_eq!(run.stages.len(), k + 1, "budget {budget}");
            assert_eq!(run.oracle_calls, cum);
        }
    }
    let err = msmd_budget_run(&inst, &setup, &SolverConfig::new(sched.counts[0] - 2, 2)).unwrap_err();
    assert!(matches!(err, Error::BudgetTooSmall { .. }));
    let small = msmd_budget_run(&inst, &setup, &SolverConfig::new(4, 2)).unwrap();
    assert!(!small.warnings.is_empty());
}

#[test]
fn fitted_schedule_spends_the_budget() {
    let (inst, setup) = multistep_problem();
    for (m, budget) in [(1, 1000), (3, 1000), (4, 5000), (2, 7)] {
        let s = fitted_schedule(inst.constants(), &setup, m, budget).unwrap();
        assert_eq!(s.total_calls(), budget);
        assert!(s.counts.windows(2).all(|w| w[0] <= w[1]));
    }
    assert!(fitted_schedule(inst.constants(), &setup, 3, 2).is_err());
}

#[test]
fn ball_iterates_stay_in_their_balls() {
    let (inst, setup) = multistep_problem();
    let run = msmd_ball_run(&inst, &setup, 3, 1.0, &SolverConfig::new(2, 4).with_stride(1)).unwrap();
    let sched = run.schedule.as_ref().unwrap();
    let radii = sched.radii.as_ref().unwrap();
    assert!((radii[0] - inst.constants().d_x).abs() < 1e-15);
    for p in &run.trace {
        let st = &run.stages[p.stage];
        assert!(Norm::L2.dist(&p.x, &st.start) <= radii[p.stage] + 1e-7);
    }
    let entropy_set = inst.set().clone();
    let entropy = ProximalSetup::entropy(&entropy_set).unwrap();
    assert!(msmd_ball_run(&inst, &entropy, 2, 1.0, &SolverConfig::new(2, 0)).is_err());
}
