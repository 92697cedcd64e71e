//! Browser bindings for the confidence-interval and step-schedule demo.
//!
//! Three operations are exported, each returning a JSON string that the
//! static page in `www/` draws on a canvas:
//!
//! * [`ci_widths`]: the three intervals on the quadratic simplex instance over
//!   a handful of replications, with their coverage and widths;
//! * [`step_schedules`]: the constant step of single-stage mirror descent next
//!   to the stage steps of the multistep method for the same budget;
//! * [`trajectories`]: the averaged paired runs of the two methods.
//!
//! The work is done by plain Rust functions so that it can be tested off the
//! browser; the exported wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mirror_bounds::harness::{
    auto_stages, run_coverage, run_trajectory_compare, trajectory_sheet, ExperimentConfig, ExperimentKind,
    GridPoint, InstanceSpec, StepRow, TrajectoryRow,
};
use mirror_bounds::sets::FloorSimplex;
use mirror_bounds::solvers::{fitted_schedule, rsa_step};
use mirror_bounds::{FeasibleSet, ProximalSetup, SetupKind};

/// Weights of the quadratic instance used throughout the demo.
const ALPHA0: f64 = 0.1;
const ALPHA1: f64 = 0.9;

/// Keeps the page responsive: the browser runs everything on one thread.
const MAX_WORK: usize = 20_000_000;

fn instance(lambda0: f64) -> InstanceSpec {
    InstanceSpec::Quadratic {
        alpha0: ALPHA0,
        alpha1: ALPHA1,
        lambda0,
        a: 1.0,
        b: 0.0,
    }
}

fn check_work(n: usize, budget: usize, runs: usize) -> Result<(), String> {
    if n.saturating_mul(budget).saturating_mul(runs) > MAX_WORK {
        return Err(format!(
            "n·N·runs = {} exceeds the demo limit of {MAX_WORK}; use the command-line tool for larger studies",
            n.saturating_mul(budget).saturating_mul(runs)
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct IntervalRow {
    pub replication: usize,
    pub f_star: f64,
    pub kept: bool,
    /// `[low, high]` of the asymptotic, first-kind and second-kind intervals.
    pub asymptotic: [f64; 2],
    pub smd1: [f64; 2],
    pub smd2: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct CiWidths {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub theta: f64,
    pub rows: Vec<IntervalRow>,
    /// Coverage over the kept replications.
    pub coverage: [f64; 3],
    pub mean_width: [f64; 3],
    pub failures: usize,
}

/// Runs the coverage protocol on one cell with the entropy setup.
pub fn ci_widths_impl(n: usize, budget: usize, replications: usize, theta: f64, seed: u64) -> Result<CiWidths, String> {
    check_work(n, budget, replications)?;
    let mut config = ExperimentConfig::coverage(instance(0.0), vec![GridPoint { n, budget }], replications);
    config.thetas = vec![theta];
    config.setup = SetupKind::Entropy;
    config.master_seed = seed;
    config.workers = Some(1);
    let report = run_coverage(&config).map_err(|e| e.to_string())?;
    let cell = &report.cells[0];
    let rows = cell
        .replications
        .iter()
        .enumerate()
        .map(|(i, r)| IntervalRow {
            replication: r.replication,
            f_star: r.f_star,
            kept: cell.kept.contains(&i),
            asymptotic: [r.asymptotic.low, r.asymptotic.high],
            smd1: [r.smd1.low, r.smd1.high],
            smd2: [r.smd2[0].low, r.smd2[0].high],
        })
        .collect();
    let row = |m: &str, t: Option<f64>| cell.coverage_of(m, t).map_or((f64::NAN, f64::NAN), |r| (r.coverage, r.mean_width));
    let (a, s1, s2) = (row("asymptotic", None), row("smd1", None), row("smd2", Some(theta)));
    Ok(CiWidths {
        n,
        budget,
        theta,
        rows,
        coverage: [a.0, s1.0, s2.0],
        mean_width: [a.1, s1.1, s2.1],
        failures: cell.failures.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct Schedules {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub smd_step: f64,
    pub stage_steps: Vec<f64>,
    /// Oracle calls of each stage.
    pub stage_calls: Vec<usize>,
}

/// The single-stage step and the multistep schedule for one budget; `stages`
/// of zero picks the stage count from the budget.
pub fn step_schedules_impl(n: usize, budget: usize, lambda0: f64, stages: usize) -> Result<Schedules, String> {
    if lambda0 <= 0.0 {
        return Err("the multistep schedule needs λ₀ > 0".into());
    }
    let sheet = trajectory_sheet(n, ALPHA0, ALPHA1, lambda0);
    let set = FeasibleSet::Simplex(FloorSimplex::probability(n).map_err(|e| e.to_string())?);
    let setup = ProximalSetup::euclidean(&set).map_err(|e| e.to_string())?;
    let probe = fitted_schedule(&sheet, &setup, 2, budget).map_err(|e| e.to_string())?;
    let m = if stages == 0 { auto_stages(probe.a_const, probe.beta, budget) } else { stages };
    let schedule = fitted_schedule(&sheet, &setup, m, budget).map_err(|e| e.to_string())?;
    Ok(Schedules {
        n,
        budget,
        smd_step: rsa_step(&sheet, sheet.d_x, budget),
        stage_calls: schedule.counts.iter().map(|c| c - 1).collect(),
        stage_steps: schedule.steps,
    })
}

#[derive(Debug, Serialize)]
pub struct Trajectories {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub f_star: f64,
    pub smd_mean_final_f: f64,
    pub mssmd_mean_final_f: f64,
    pub rows: Vec<TrajectoryRow>,
    pub steps: Vec<StepRow>,
}

/// Paired runs of single-stage and multistep mirror descent, averaged.
pub fn trajectories_impl(n: usize, budget: usize, lambda0: f64, runs: usize, seed: u64) -> Result<Trajectories, String> {
    check_work(n, budget, 2 * runs)?;
    let mut config = ExperimentConfig::coverage(instance(lambda0), vec![GridPoint { n, budget }], runs);
    config.kind = ExperimentKind::TrajectoryCompare;
    config.master_seed = seed;
    config.workers = Some(1);
    let mut report = run_trajectory_compare(&config).map_err(|e| e.to_string())?;
    let cell = report.cells.remove(0);
    Ok(Trajectories {
        n,
        budget,
        f_star: cell.f_star,
        smd_mean_final_f: cell.smd_mean_final_f,
        mssmd_mean_final_f: cell.mssmd_mean_final_f,
        rows: cell.trajectory,
        steps: cell.steps,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Intervals of every replication on the quadratic instance (JSON).
#[wasm_bindgen]
pub fn ci_widths(n: usize, budget: usize, replications: usize, theta: f64, seed: u64) -> Result<String, JsError> {
    to_js(ci_widths_impl(n, budget, replications, theta, seed))
}

/// Single-stage step and multistep schedule (JSON).
#[wasm_bindgen]
pub fn step_schedules(n: usize, budget: usize, lambda0: f64, stages: usize) -> Result<String, JsError> {
    to_js(step_schedules_impl(n, budget, lambda0, stages))
}

/// Averaged paired trajectories (JSON).
#[wasm_bindgen]
pub fn trajectories(n: usize, budget: usize, lambda0: f64, runs: usize, seed: u64) -> Result<String, JsError> {
    to_js(trajectories_impl(n, budget, lambda0, runs, seed))
}
