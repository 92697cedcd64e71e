//! Coverage and width studies of the three confidence intervals.
//!
//! Each replication generates a fresh instance, computes its certified
//! optimum, draws one sample of size `N` and builds from that same sample
//! the asymptotic interval of the sample-average approximation, the interval
//! of the first kind from a mirror descent run with the method's stepsize,
//! and the interval of the second kind for every configured θ.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, GridPoint, InstanceSpec};
use super::output::{write_csv, CsvRow};
use super::{par_map, timed, worker_count};
use crate::bounds::{ci_asymptotic, ci_smd1, ci_smd2, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::problem::{Draw, StochasticProblem};
use crate::problems::ReferenceSolvable;
use crate::prox::ProximalSetup;
use crate::seeds::{derive_seed, label_hash, rng_from_seed};
use crate::solvers::{smd_run_with_draws, theta_step, SolverConfig};

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub replication: usize,
    pub seed: u64,
    /// Certified bracket `[f_star_low, f_star]` of the optimal value.
    pub f_star: f64,
    pub f_star_low: f64,
    /// Certified accuracy of the reference and sample-average solves.
    pub tolerance: f64,
    pub asymptotic: ConfidenceInterval,
    pub smd1: ConfidenceInterval,
    /// One interval per configured θ, in order.
    pub smd2: Vec<ConfidenceInterval>,
    /// `g^N` of the run behind the interval of the first kind.
    pub g_smd1: f64,
    pub g_smd2: Vec<f64>,
    /// Seconds spent on the asymptotic, first-kind and second-kind intervals.
    pub seconds_asymptotic: f64,
    pub seconds_smd1: f64,
    pub seconds_smd2: Vec<f64>,
}

impl Replication {
    /// Whether the interval meets the certified bracket of the optimum, up to
    /// the accuracy with which the interval ends themselves were computed.
    pub fn covers(&self, ci: &ConfidenceInterval) -> bool {
        ci.low - self.tolerance <= self.f_star && self.f_star_low <= ci.high + self.tolerance
    }
}

/// A replication whose reference computation or interval failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

impl CsvRow for ReplicationFailure {
    const COLUMNS: &'static [&'static str] = &["replication", "seed", "error"];
}

/// Coverage and mean width of one method over the kept replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub method: String,
    pub theta: Option<f64>,
    pub coverage: f64,
    pub mean_width: f64,
    pub replications: usize,
}

impl CsvRow for CoverageRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "method", "theta", "coverage", "mean_width", "replications"];
}

/// Mean ratio of the widths of two methods over the kept replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub numerator: String,
    pub denominator: String,
    pub theta: Option<f64>,
    pub mean_ratio: f64,
    pub replications: usize,
}

impl CsvRow for RatioRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "numerator", "denominator", "theta", "mean_ratio", "replications"];
}

/// Compute time of one method over the kept replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub method: String,
    pub theta: Option<f64>,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub replications: usize,
}

impl CsvRow for TimingRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "method", "theta", "mean_seconds", "median_seconds", "replications"];
}

/// One interval of one replication, for scatter plots of the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub budget: usize,
    pub replication: usize,
    pub seed: u64,
    pub kept: bool,
    pub f_star: f64,
    pub method: String,
    pub theta: Option<f64>,
    /// The point estimate: `g^N` for the mirror descent intervals and the
    /// sample-average optimum for the asymptotic one.
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub covers: bool,
}

impl CsvRow for ReplicationRow {
    const COLUMNS: &'static [&'static str] = &["n", "N", "replication", "seed", "kept", "f_star", "method", "theta", "estimate", "low", "high", "covers"];
}

/// Everything computed for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub point: GridPoint,
    /// Successful replications ordered by index.
    pub replications: Vec<Replication>,
    pub failures: Vec<ReplicationFailure>,
    /// Indices into `replications` that survive the filter, in order.
    pub kept: Vec<usize>,
    pub coverage: Vec<CoverageRow>,
    pub ratios: Vec<RatioRow>,
    pub timing: Vec<TimingRow>,
}

impl CellReport {
    pub fn coverage_of(&self, method: &str, theta: Option<f64>) -> Option<&CoverageRow> {
        self.coverage.iter().find(|r| r.method == method && r.theta == theta)
    }

    pub fn ratio_of(&self, numerator: &str, denominator: &str, theta: Option<f64>) -> Option<&RatioRow> {
        self.ratios
            .iter()
            .find(|r| r.numerator == numerator && r.denominator == denominator && r.theta == theta)
    }

    /// Per-replication rows of every interval.
    pub fn replication_rows(&self, thetas: &[f64]) -> Vec<ReplicationRow> {
        let mut kept = vec![false; self.replications.len()];
        for &k in &self.kept {
            kept[k] = true;
        }
        let mut rows = Vec::new();
        for (rep, &is_kept) in self.replications.iter().zip(&kept) {
            let mut push = |method: &str, theta: Option<f64>, estimate: f64, ci: &ConfidenceInterval| {
                rows.push(ReplicationRow {
                    n: self.point.n,
                    budget: self.point.budget,
                    replication: rep.replication,
                    seed: rep.seed,
                    kept: is_kept,
                    f_star: rep.f_star,
                    method: method.into(),
                    theta,
                    estimate,
                    low: ci.low,
                    high: ci.high,
                    covers: rep.covers(ci),
                });
            };
            let saa = 0.5 * (rep.asymptotic.low + rep.asymptotic.high);
            push("asymptotic", None, saa, &rep.asymptotic);
            push("smd1", None, rep.g_smd1, &rep.smd1);
            for (i, t) in thetas.iter().enumerate() {
                push("smd2", Some(*t), rep.g_smd2[i], &rep.smd2[i]);
            }
        }
        rows
    }
}

/// The result of a coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
}

/// Seed of replication `r` of a cell.
fn replication_seed(config: &ExperimentConfig, point: GridPoint, r: usize) -> u64 {
    derive_seed(
        config.master_seed,
        &[
            label_hash(config.instance.label()),
            point.n as u64,
            point.budget as u64,
            r as u64,
        ],
    )
}

/// Runs the coverage study over the grid and writes its CSV files when an
/// output directory is configured.
pub fn run_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validate()?;
    if !matches!(config.kind, ExperimentKind::Coverage | ExperimentKind::WidthSweep) {
        return Err(Error::param("run_coverage needs a coverage or width-sweep configuration"));
    }
    let workers = worker_count(config.workers);
    let mut cells = Vec::with_capacity(config.grid.len());
    for &point in &config.grid {
        let outcomes = par_map(config.replications, workers, |r| {
            let seed = replication_seed(config, point, r);
            replicate(config, point, r, seed).map_err(|e| ReplicationFailure {
                replication: r,
                seed,
                error: e.to_string(),
            })
        })?;
        let mut replications = Vec::new();
        let mut failures = Vec::new();
        for o in outcomes {
            match o {
                Ok(rep) => replications.push(rep),
                Err(f) => failures.push(f),
            }
        }
        let cell = summarize(config, point, replications, failures);
        if let Some(dir) = &config.output_dir {
            let stem = format!("{}_{}_{}", config.instance.label(), point.n, point.budget);
            write_csv(&dir.join(format!("coverage_{stem}.csv")), &cell.coverage)?;
            write_csv(&dir.join(format!("ratio_{stem}.csv")), &cell.ratios)?;
            write_csv(&dir.join(format!("timing_{stem}.csv")), &cell.timing)?;
            write_csv(&dir.join(format!("replications_{stem}.csv")), &cell.replication_rows(&config.thetas))?;
            write_csv(&dir.join(format!("failures_{stem}.csv")), &cell.failures)?;
        }
        cells.push(cell);
    }
    Ok(CoverageReport {
        config: config.clone(),
        cells,
    })
}

fn replicate(config: &ExperimentConfig, point: GridPoint, r: usize, seed: u64) -> Result<Replication> {
    let instance_seed = derive_seed(seed, &[0]);
    match &config.instance {
        InstanceSpec::Quadratic { .. } => {
            let inst = config.instance.quadratic(point.n, config.setup.norm(), instance_seed)?;
            replicate_on(&inst, config, point, r, seed)
        }
        InstanceSpec::Cvar { .. } => {
            let inst = config.instance.cvar(point.n, instance_seed)?;
            replicate_on(&inst, config, point, r, seed)
        }
    }
}

pub(crate) fn replicate_on<P>(problem: &P, config: &ExperimentConfig, point: GridPoint, r: usize, seed: u64) -> Result<Replication>
where
    P: StochasticProblem + ReferenceSolvable,
{
    let optimum = problem.exact_optimum(config.reference_tol)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let draws: Vec<Draw> = (0..point.budget).map(|_| problem.sample(&mut rng)).collect();
    let setup = ProximalSetup::new(config.setup, problem.set())?;
    let constants = problem.constants();

    let (asymptotic, seconds_asymptotic) = timed(|| -> Result<ConfidenceInterval> {
        let saa = problem.saa_solve(&draws, config.reference_tol)?;
        ci_asymptotic(&saa, config.alpha)
    });
    let asymptotic = asymptotic?;

    let (first, seconds_smd1) = timed(|| -> Result<(ConfidenceInterval, f64)> {
        let run = smd_run_with_draws(problem, &setup, &SolverConfig::new(point.budget, seed), &draws)?;
        Ok((ci_smd1(&run, constants, &setup, config.alpha)?, run.g_avg))
    });
    let (smd1, g_smd1) = first?;

    let mut smd2 = Vec::with_capacity(config.thetas.len());
    let mut g_smd2 = Vec::with_capacity(config.thetas.len());
    let mut seconds_smd2 = Vec::with_capacity(config.thetas.len());
    for &theta in &config.thetas {
        let (second, secs) = timed(|| -> Result<(ConfidenceInterval, f64)> {
            let step = theta_step(constants, &setup, theta, point.budget)?;
            let cfg = SolverConfig::new(point.budget, seed).with_step(step);
            let run = smd_run_with_draws(problem, &setup, &cfg, &draws)?;
            Ok((ci_smd2(&run, constants, &setup, config.alpha, theta)?, run.g_avg))
        });
        let (ci, g) = second?;
        smd2.push(ci);
        g_smd2.push(g);
        seconds_smd2.push(secs);
    }
    Ok(Replication {
        replication: r,
        seed,
        f_star: optimum.value,
        f_star_low: optimum.lower_bound,
        tolerance: config.reference_tol,
        asymptotic,
        smd1,
        smd2,
        g_smd1,
        g_smd2,
        seconds_asymptotic,
        seconds_smd1,
        seconds_smd2,
    })
}

/// Indices of the replications kept after dropping the `⌊fraction·count⌋`
/// smallest asymptotic widths (ties broken by replication index).
pub(crate) fn filter_kept(replications: &[Replication], fraction: f64) -> Vec<usize> {
    let drop = (fraction * replications.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..replications.len()).collect();
    order.sort_by(|&a, &b| {
        replications[a]
            .asymptotic
            .width()
            .total_cmp(&replications[b].asymptotic.width())
            .then(replications[a].replication.cmp(&replications[b].replication))
    });
    let mut kept: Vec<usize> = order[drop..].to_vec();
    kept.sort_unstable();
    kept
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn summarize(
    config: &ExperimentConfig,
    point: GridPoint,
    replications: Vec<Replication>,
    failures: Vec<ReplicationFailure>,
) -> CellReport {
    let kept = filter_kept(&replications, config.filter_fraction);
    let reps: Vec<&Replication> = kept.iter().map(|&k| &replications[k]).collect();
    let count = reps.len();
    type Pick<'a> = Box<dyn Fn(&Replication) -> (&ConfidenceInterval, f64) + 'a>;
    let mut methods: Vec<(String, Option<f64>, Pick)> = vec![
        ("asymptotic".into(), None, Box::new(|r: &Replication| (&r.asymptotic, r.seconds_asymptotic))),
        ("smd1".into(), None, Box::new(|r: &Replication| (&r.smd1, r.seconds_smd1))),
    ];
    for (i, &t) in config.thetas.iter().enumerate() {
        methods.push((
            "smd2".into(),
            Some(t),
            Box::new(move |r: &Replication| (&r.smd2[i], r.seconds_smd2[i])),
        ));
    }
    let mut coverage = Vec::new();
    let mut timing = Vec::new();
    let mut widths: Vec<Vec<f64>> = Vec::new();
    for (name, theta, pick) in &methods {
        let covered = reps.iter().filter(|r| r.covers(pick(r).0)).count();
        let w: Vec<f64> = reps.iter().map(|r| pick(r).0.width()).collect();
        let secs: Vec<f64> = reps.iter().map(|r| pick(r).1).collect();
        coverage.push(CoverageRow {
            n: point.n,
            budget: point.budget,
            method: name.clone(),
            theta: *theta,
            coverage: if count == 0 { f64::NAN } else { covered as f64 / count as f64 },
            mean_width: mean(&w),
            replications: count,
        });
        timing.push(TimingRow {
            n: point.n,
            budget: point.budget,
            method: name.clone(),
            theta: *theta,
            mean_seconds: mean(&secs),
            median_seconds: median(&secs),
            replications: count,
        });
        widths.push(w);
    }
    let ratio = |num: usize, den: usize| -> f64 {
        let r: Vec<f64> = widths[num].iter().zip(&widths[den]).map(|(a, b)| a / b).collect();
        mean(&r)
    };
    let mut ratios = vec![RatioRow {
        n: point.n,
        budget: point.budget,
        numerator: "smd1".into(),
        denominator: "asymptotic".into(),
        theta: None,
        mean_ratio: ratio(1, 0),
        replications: count,
    }];
    for (i, &t) in config.thetas.iter().enumerate() {
        for (den, name) in [(0, "asymptotic"), (1, "smd1")] {
            ratios.push(RatioRow {
                n: point.n,
                budget: point.budget,
                numerator: "smd2".into(),
                denominator: name.into(),
                theta: Some(t),
                mean_ratio: ratio(2 + i, den),
                replications: count,
            });
        }
    }
    CellReport {
        point,
        replications,
        failures,
        kept,
        coverage,
        ratios,
        timing,
    }
}
