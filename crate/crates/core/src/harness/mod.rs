//! Batch experiments: coverage and width studies of the confidence
//! intervals, and paired trajectory comparisons of single-stage and
//! multistep mirror descent.
//!
//! Every replication draws its own seed from the master seed, so cells are
//! reproducible independently of each other and of the worker count. Results
//! are written as CSV files that start with the schema line
//! `# mirror-bounds v1`; timing lives in separate files so that the other
//! outputs are byte-identical across runs.

mod config;
mod coverage;
mod output;
mod trajectory;

pub use config::{ExperimentConfig, ExperimentKind, GridPoint, InstanceSpec};
pub use coverage::{
    run_coverage, CellReport, CoverageReport, CoverageRow, RatioRow, Replication, ReplicationFailure,
    ReplicationRow, TimingRow,
};
pub use output::{write_atomic, write_csv, CsvRow, CSV_SCHEMA_LINE};
pub use trajectory::{
    auto_stages, run_trajectory_compare, trajectory_sheet, StepRow, TrajectoryCell, TrajectoryReport, TrajectoryRow,
};

use crate::error::Result;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "MIRROR_BOUNDS_WORKERS";

/// Worker count: the configured value, capped by `MIRROR_BOUNDS_WORKERS`,
/// defaulting to the available parallelism.
pub fn worker_count(configured: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut w = configured.unwrap_or(available).max(1);
    if let Some(cap) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        w = w.min(cap.max(1));
    }
    w
}

/// Maps `f` over `0..count` on up to `workers` threads, preserving order.
pub(crate) fn par_map<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| crate::error::Error::Numerical(format!("cannot start worker pool: {e}")))?;
            return Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()));
        }
    }
    let _ = workers;
    Ok((0..count).map(f).collect())
}

/// Wall-clock seconds of a closure; zero where no clock is available.
pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let start = std::time::Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    }
    #[cfg(target_arch = "wasm32")]
    {
        (f(), 0.0)
    }
}
