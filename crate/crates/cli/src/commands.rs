//! The subcommands. Each returns the one-line summary to print.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use mirror_bounds::bounds::{ci_asymptotic, ci_multistep, ci_smd1, ci_smd2, ConfidenceInterval};
use mirror_bounds::eprm::{cvar_as_eprm_bounded, Eprm};
use mirror_bounds::harness::{
    run_coverage, run_trajectory_compare, write_atomic, ExperimentConfig, ExperimentKind, GridPoint,
};
use mirror_bounds::problems::{gen_instance1, gen_instance2, CvarInstance, Optimum, QuadraticInstance, SaaSolution};
use mirror_bounds::seeds::rng_from_seed;
use mirror_bounds::solvers::{
    msmd_ball_run, msmd_budget_run, msmd_run, rsa_run, smd_run, theta_step, RunRecord, SolverConfig,
};
use mirror_bounds::{Draw, ProximalSetup, SetupKind, StochasticProblem};

use crate::args::{AlgorithmArg, CiArgs, CiMethodArg, EprmArgs, ExperimentArgs, Family, InstanceArgs, SolveArgs};
use crate::Failure;

/// A generated instance of either family.
enum Instance {
    Quadratic(QuadraticInstance),
    Cvar(CvarInstance),
}

impl Instance {
    fn build(args: &InstanceArgs) -> anyhow::Result<(Instance, ProximalSetup)> {
        let kind = SetupKind::from(args.setup);
        let inst = match args.family {
            Family::Quadratic => Instance::Quadratic(gen_instance1(
                args.n,
                args.alpha0,
                args.alpha1,
                args.lambda0,
                1.0,
                0.0,
                kind.norm(),
                args.instance_seed,
            )?),
            Family::Cvar => {
                if kind != SetupKind::Euclidean {
                    bail!("the CVaR instance carries a Euclidean constant sheet; use --setup euclidean");
                }
                Instance::Cvar(gen_instance2(
                    args.n,
                    args.alpha0,
                    args.alpha1,
                    args.epsilon,
                    args.lambda0,
                    args.pool,
                    args.instance_seed,
                )?)
            }
        };
        let setup = ProximalSetup::new(kind, inst.problem().set())?;
        Ok((inst, setup))
    }

    fn problem(&self) -> &dyn StochasticProblem {
        match self {
            Instance::Quadratic(q) => q,
            Instance::Cvar(c) => c,
        }
    }

    fn exact_optimum(&self, tol: f64) -> mirror_bounds::Result<Optimum> {
        match self {
            Instance::Quadratic(q) => q.exact_optimum(tol),
            Instance::Cvar(c) => c.exact_optimum(tol),
        }
    }

    fn saa_solve(&self, sample: &[Draw], tol: f64) -> mirror_bounds::Result<SaaSolution> {
        match self {
            Instance::Quadratic(q) => q.saa_solve(sample, tol),
            Instance::Cvar(c) => c.saa_solve(sample, tol),
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn solve(args: &SolveArgs) -> anyhow::Result<String> {
    let (inst, setup) = Instance::build(&args.instance)?;
    let problem = inst.problem();
    let mut config = SolverConfig::new(args.budget, args.seed).with_stride(args.stride);
    config.step = args.step;
    let run: RunRecord = match args.algorithm {
        AlgorithmArg::Rsa => rsa_run(problem, &config)?,
        AlgorithmArg::Smd => smd_run(problem, &setup, &config)?,
        AlgorithmArg::Msmd => msmd_run(problem, &setup, args.stages, &config)?,
        AlgorithmArg::MsmdBudget => msmd_budget_run(problem, &setup, &config)?,
        AlgorithmArg::MsmdBall => msmd_ball_run(problem, &setup, args.stages, args.theta, &config)?,
    };
    let summary = format!(
        "{} on {} (n = {}): {} oracle calls, g = {:.6}, final step {:.3e}",
        run.algorithm.name(),
        run.problem,
        problem.dim(),
        run.oracle_calls,
        run.g_avg,
        run.final_step()
    );
    match &args.out {
        Some(path) => {
            write_json(path, &run)?;
            Ok(format!("{summary}; record written to {}", path.display()))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&run)?);
            Ok(summary)
        }
    }
}

pub fn ci(args: &CiArgs) -> anyhow::Result<String> {
    let (inst, setup) = Instance::build(&args.instance)?;
    let problem = inst.problem();
    let sheet = problem.constants();
    let config = SolverConfig::new(args.budget, args.seed);
    let interval: ConfidenceInterval = match args.method {
        CiMethodArg::Smd1 => ci_smd1(&smd_run(problem, &setup, &config)?, sheet, &setup, args.alpha)?,
        CiMethodArg::Smd2 => {
            let step = theta_step(sheet, &setup, args.theta, args.budget)?;
            let run = smd_run(problem, &setup, &config.with_step(step))?;
            ci_smd2(&run, sheet, &setup, args.alpha, args.theta)?
        }
        CiMethodArg::Multistep => {
            let run = msmd_ball_run(problem, &setup, args.stages, args.theta, &config)?;
            ci_multistep(&run, sheet, &setup, args.theta)?
        }
        CiMethodArg::Asymptotic => {
            let mut rng = rng_from_seed(args.seed);
            let sample: Vec<Draw> = (0..args.budget).map(|_| problem.sample(&mut rng)).collect();
            ci_asymptotic(&inst.saa_solve(&sample, 1e-8)?, args.alpha)?
        }
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&interval)?);
    }
    let optimum = inst.exact_optimum(1e-8).ok();
    let reference = optimum.map_or(String::new(), |o| format!(", reference f* = {:.6}", o.value));
    Ok(format!(
        "{}: low {:.6} high {:.6} width {:.6} level {:.3} thetas {:?}{reference}",
        interval.method.name(),
        interval.low,
        interval.high,
        interval.width(),
        interval.level,
        interval.thetas
    ))
}

/// Reads an experiment configuration and applies the command-line overrides.
/// Any problem with the configuration itself is a usage error.
fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .map_err(Failure::Runtime)?;
    let usage = |e: anyhow::Error| Failure::Usage(e.context(format!("configuration {}", args.config.display())));
    let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| usage(e.into()))?;
    if let Some(dir) = &args.out {
        config.output_dir = Some(dir.clone());
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(cells) = &args.grid {
        config.grid = cells.iter().map(|c| parse_cell(c)).collect::<anyhow::Result<_>>().map_err(usage)?;
    }
    if let Some(f) = args.filter {
        config.filter_fraction = f;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(t) = &args.thetas {
        config.thetas = t.clone();
    }
    if let Some(s) = args.setup {
        config.setup = s.into();
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    if let Some(t) = args.reference_tol {
        config.reference_tol = t;
    }
    if args.stages.is_some() {
        config.stages = args.stages;
    }
    if args.stride.is_some() {
        config.stride = args.stride;
    }
    config.validate().map_err(|e| usage(e.into()))?;
    Ok(config)
}

fn parse_cell(text: &str) -> anyhow::Result<GridPoint> {
    let (n, budget) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("grid cell `{text}` is not of the form n:N"))?;
    Ok(GridPoint {
        n: n.trim().parse().with_context(|| format!("grid cell `{text}`"))?,
        budget: budget.trim().parse().with_context(|| format!("grid cell `{text}`"))?,
    })
}

fn output_note(config: &ExperimentConfig) -> String {
    config
        .output_dir
        .as_ref()
        .map_or(String::new(), |d| format!("; outputs in {}", d.display()))
}

pub fn coverage(args: &ExperimentArgs) -> Result<String, Failure> {
    let config = experiment_config(args)?;
    if !matches!(config.kind, ExperimentKind::Coverage | ExperimentKind::WidthSweep) {
        return Err(Failure::Usage(anyhow!(
            "configuration kind {:?} is not a coverage study",
            config.kind
        )));
    }
    let report = run_coverage(&config).map_err(|e| Failure::Runtime(e.into()))?;
    let cells: Vec<String> = report
        .cells
        .iter()
        .map(|c| {
            let cov = |m: &str, t: Option<f64>| c.coverage_of(m, t).map_or(f64::NAN, |r| r.coverage);
            format!(
                "({}, {}) smd1 {:.3} smd2 {:.3} asymptotic {:.3} [{} kept, {} failed]",
                c.point.n,
                c.point.budget,
                cov("smd1", None),
                cov("smd2", config.thetas.first().copied()),
                cov("asymptotic", None),
                c.kept.len(),
                c.failures.len()
            )
        })
        .collect();
    Ok(format!("coverage: {}{}", cells.join("; "), output_note(&config)))
}

pub fn compare(args: &ExperimentArgs) -> Result<String, Failure> {
    let mut config = experiment_config(args)?;
    config.kind = ExperimentKind::TrajectoryCompare;
    let report = run_trajectory_compare(&config).map_err(|e| Failure::Runtime(e.into()))?;
    let cells: Vec<String> = report
        .cells
        .iter()
        .map(|c| {
            format!(
                "({}, {}) mean final f single-stage {:.5} multistep {:.5} over {} runs",
                c.point.n, c.point.budget, c.smd_mean_final_f, c.mssmd_mean_final_f, c.runs
            )
        })
        .collect();
    Ok(format!("compare: {}{}", cells.join("; "), output_note(&config)))
}

pub fn eprm_eval(args: &EprmArgs) -> Result<String, Failure> {
    let weights = match &args.weights {
        Some(w) => w.clone(),
        None => vec![1.0 / args.atoms.len() as f64; args.atoms.len()],
    };
    let eprm = match (&args.model, args.cvar) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Runtime)?;
            Eprm::from_json(&text).map_err(|e| Failure::Usage(anyhow::Error::from(e).context(path.display().to_string())))?
        }
        (None, Some(eps)) => {
            let radius = args
                .radius
                .unwrap_or_else(|| args.atoms.iter().fold(1.0f64, |m, a| m.max(a.abs())));
            let model = cvar_as_eprm_bounded(eps, radius).map_err(|e| Failure::Usage(e.into()))?;
            Eprm::new(model).map_err(|e| Failure::Runtime(e.into()))?
        }
        (None, None) => return Err(Failure::Usage(anyhow!("either --model or --cvar is required"))),
    };
    let value = eprm.evaluate(&args.atoms, &weights).map_err(|e| Failure::Runtime(e.into()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&value).map_err(|e| Failure::Runtime(e.into()))?);
    }
    Ok(format!(
        "risk value {:.9} (certified lower bound {:.9}, {} cutting-plane iterations)",
        value.value, value.lower_bound, value.iterations
    ))
}
