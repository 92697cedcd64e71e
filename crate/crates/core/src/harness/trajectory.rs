//! Paired comparisons of single-stage and multistep mirror descent on the
//! strongly convex quadratic instance.
//!
//! Both methods start at the first vertex `e₁` of the simplex, use the
//! Euclidean setup (so the single-stage method is robust stochastic
//! approximation) and consume the same sample stream. The multistep method
//! spends exactly the same budget through a geometrically shaped schedule.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, GridPoint, InstanceSpec};
use super::output::{write_atomic, write_csv, CsvRow};
use super::{par_map, worker_count};
use crate::error::{Error, Result};
use crate::linalg::Norm;
use crate::problem::{ConstantSheet, StochasticProblem};
use crate::problems::QuadraticInstance;
use crate::prox::ProximalSetup;
use crate::seeds::{derive_seed, label_hash};
use crate::solvers::{fitted_schedule, msmd_run_schedule, rsa_run, MultistepSchedule, RunRecord, SolverConfig, MAX_STAGES};

/// Averaged trajectories at one trace iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    /// `smd` or `mssmd`.
    pub series: String,
    /// Global oracle call count.
    pub iteration: usize,
    pub stage: usize,
    /// Mean over runs of the running estimate (`g^i`, or the within-stage
    /// `g^{i,j}` for the multistep method).
    pub mean_g: f64,
    /// Mean over runs of `f` at the current averaged solution.
    pub mean_f: f64,
}

impl CsvRow for TrajectoryRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "series", "iteration", "stage", "mean_g", "mean_f"];
}

/// The constant step of one stage (the single-stage method has one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub series: String,
    pub stage: usize,
    pub first_iteration: usize,
    pub last_iteration: usize,
    pub step: f64,
}

impl CsvRow for StepRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "series", "stage", "first_iteration", "last_iteration", "step"];
}

/// Summary of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCell {
    pub point: GridPoint,
    pub runs: usize,
    /// `f*` of the instance (certified).
    pub f_star: f64,
    pub smd_step: f64,
    pub schedule: MultistepSchedule,
    /// Per-run final `f(x̂)` of each method, paired by index.
    pub smd_final_f: Vec<f64>,
    pub mssmd_final_f: Vec<f64>,
    pub smd_mean_final_f: f64,
    pub mssmd_mean_final_f: f64,
    pub trajectory: Vec<TrajectoryRow>,
    pub steps: Vec<StepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub config: ExperimentConfig,
    pub cells: Vec<TrajectoryCell>,
}

/// The constant sheet of the comparison: Euclidean norm, `μ(f) = 1`, `ρ = 2`,
/// `D_X = √2`, `L = α₀√n + α₁(1 + λ₀)√n`, `M₁ = 2|α₀| + 0.5α₁` and
/// `M₂ = (2|α₀| + 2α₁)√n`.
pub fn trajectory_sheet(n: usize, alpha0: f64, alpha1: f64, lambda0: f64) -> ConstantSheet {
    let rn = (n as f64).sqrt();
    let l = alpha0.abs() * rn + alpha1 * (1.0 + lambda0) * rn;
    ConstantSheet {
        l,
        m1: 2.0 * alpha0.abs() + 0.5 * alpha1,
        m2: (2.0 * alpha0.abs() + 2.0 * alpha1) * rn,
        m_star: Some(l),
        d_x: 2f64.sqrt(),
        norm: Norm::L2,
        rho: Some(2.0),
        mu_f: Some(1.0),
    }
}

/// Stage count for a budget: the number of full stages the budgeted method
/// would run, `⌊log₂(1 + (2^β − 1)N/A)/β⌋`, but at least two so that the
/// schedule actually changes step.
pub fn auto_stages(schedule_a: f64, beta: f64, budget: usize) -> usize {
    let growth = 2f64.powf(beta) - 1.0;
    let k = (1.0 + growth * budget as f64 / schedule_a).log2() / beta;
    (k.floor().max(0.0) as usize).clamp(2, MAX_STAGES)
}

/// Runs the paired comparison on every grid cell and writes the trajectory
/// and step CSV files when an output directory is configured.
pub fn run_trajectory_compare(config: &ExperimentConfig) -> Result<TrajectoryReport> {
    config.validate()?;
    if config.kind != ExperimentKind::TrajectoryCompare {
        return Err(Error::param("run_trajectory_compare needs a trajectory-compare configuration"));
    }
    let InstanceSpec::Quadratic {
        alpha0,
        alpha1,
        lambda0,
        a,
        b,
    } = config.instance
    else {
        return Err(Error::param("trajectory comparisons run on the quadratic instance"));
    };
    if a != 1.0 || b != 0.0 || lambda0 <= 0.0 {
        return Err(Error::param(
            "trajectory comparisons need the probability simplex and λ₀ > 0 (μ(f) = 1 is prescribed)",
        ));
    }
    let workers = worker_count(config.workers);
    let mut cells = Vec::with_capacity(config.grid.len());
    for &point in &config.grid {
        let cell_seed = derive_seed(
            config.master_seed,
            &[label_hash("trajectory"), point.n as u64, point.budget as u64],
        );
        let sheet = trajectory_sheet(point.n, alpha0, alpha1, lambda0);
        let inst = config
            .instance
            .quadratic(point.n, Norm::L2, derive_seed(cell_seed, &[0]))?
            .with_constants(sheet.clone())?;
        let setup = ProximalSetup::euclidean(inst.set())?;
        let probe = fitted_schedule(&sheet, &setup, 2, point.budget)?;
        let m = config
            .stages
            .unwrap_or_else(|| auto_stages(probe.a_const, probe.beta, point.budget));
        let schedule = fitted_schedule(&sheet, &setup, m, point.budget)?;
        let stride = config.stride.unwrap_or((point.budget / 200).max(1));
        let f_star = inst.exact_optimum(config.reference_tol)?.value;
        let mut start = vec![0.0; point.n];
        start[0] = 1.0;
        let runs = par_map(config.replications, workers, |r| -> Result<(RunRecord, RunRecord)> {
            let cfg = SolverConfig::new(point.budget, derive_seed(cell_seed, &[1, r as u64]))
                .with_start(start.clone())
                .with_stride(stride);
            let single = rsa_run(&inst, &cfg)?;
            let multi = msmd_run_schedule(&inst, &setup, &schedule, &cfg)?;
            Ok((single, multi))
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let cell = summarize(&inst, point, f_star, &schedule, &runs)?;
        if let Some(dir) = &config.output_dir {
            let stem = format!("{}_{}_{}", config.instance.label(), point.n, point.budget);
            write_csv(&dir.join(format!("trajectory_{stem}.csv")), &cell.trajectory)?;
            write_csv(&dir.join(format!("steps_{stem}.csv")), &cell.steps)?;
            let mut summary = serde_json::to_vec_pretty(&SummaryView::from(&cell))?;
            summary.push(b'\n');
            write_atomic(&dir.join(format!("summary_{stem}.json")), &summary)?;
        }
        cells.push(cell);
    }
    Ok(TrajectoryReport {
        config: config.clone(),
        cells,
    })
}

/// The JSON summary written next to the CSV files.
#[derive(Serialize)]
struct SummaryView<'a> {
    n: usize,
    #[serde(rename = "N")]
    budget: usize,
    runs: usize,
    f_star: f64,
    smd_step: f64,
    mssmd_steps: &'a [f64],
    mssmd_stage_lengths: &'a [usize],
    smd_mean_final_f: f64,
    mssmd_mean_final_f: f64,
}

impl<'a> From<&'a TrajectoryCell> for SummaryView<'a> {
    fn from(c: &'a TrajectoryCell) -> Self {
        SummaryView {
            n: c.point.n,
            budget: c.point.budget,
            runs: c.runs,
            f_star: c.f_star,
            smd_step: c.smd_step,
            mssmd_steps: &c.schedule.steps,
            mssmd_stage_lengths: &c.schedule.counts,
            smd_mean_final_f: c.smd_mean_final_f,
            mssmd_mean_final_f: c.mssmd_mean_final_f,
        }
    }
}

fn objective(inst: &QuadraticInstance, x: &[f64]) -> Result<f64> {
    inst.objective(x)
        .ok_or_else(|| Error::unsupported("the instance has no exact objective"))
}

fn summarize(
    inst: &QuadraticInstance,
    point: GridPoint,
    f_star: f64,
    schedule: &MultistepSchedule,
    runs: &[(RunRecord, RunRecord)],
) -> Result<TrajectoryCell> {
    let count = runs.len() as f64;
    let mut trajectory = Vec::new();
    for (series, pick) in [
        ("smd", (|p: &(RunRecord, RunRecord)| &p.0) as fn(&(RunRecord, RunRecord)) -> &RunRecord),
        ("mssmd", |p| &p.1),
    ] {
        let first = pick(&runs[0]);
        for (k, point_k) in first.trace.iter().enumerate() {
            let mut g = 0.0;
            let mut f = 0.0;
            for pair in runs {
                let tp = &pick(pair).trace[k];
                g += tp.g_avg / count;
                f += objective(inst, &tp.x_avg)? / count;
            }
            trajectory.push(TrajectoryRow {
                n: point.n,
                budget: point.budget,
                series: series.into(),
                iteration: point_k.iteration,
                stage: point_k.stage,
                mean_g: g,
                mean_f: f,
            });
        }
    }
    let smd_step = runs[0].0.steps[0];
    let mut steps = vec![StepRow {
        n: point.n,
        budget: point.budget,
        series: "smd".into(),
        stage: 1,
        first_iteration: 1,
        last_iteration: point.budget,
        step: smd_step,
    }];
    let mut first = 1;
    for (t, (&c, &s)) in schedule.counts.iter().zip(&schedule.steps).enumerate() {
        steps.push(StepRow {
            n: point.n,
            budget: point.budget,
            series: "mssmd".into(),
            stage: t + 1,
            first_iteration: first,
            last_iteration: first + c - 2,
            step: s,
        });
        first += c - 1;
    }
    let smd_final_f = runs.iter().map(|p| objective(inst, &p.0.x_avg)).collect::<Result<Vec<_>>>()?;
    let mssmd_final_f = runs.iter().map(|p| objective(inst, &p.1.x_avg)).collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryCell {
        point,
        runs: runs.len(),
        f_star,
        smd_step,
        schedule: schedule.clone(),
        smd_mean_final_f: smd_final_f.iter().sum::<f64>() / count,
        mssmd_mean_final_f: mssmd_final_f.iter().sum::<f64>() / count,
        smd_final_f,
        mssmd_final_f,
        trajectory,
        steps,
    })
}
