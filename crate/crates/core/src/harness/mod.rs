//! Seeded Monte-Carlo experiments: order-hit sweeps, spurious-eigenvalue
//! statistics, identity diagnostics, and their CSV/SVG outputs.
//!
//! Each trial's randomness depends only on `(master_seed, trial_index)`, and
//! results are collected in trial order, so outputs are identical for any
//! number of worker threads.

mod assignment;
mod cdf;
mod config;
mod output;
mod sweep;
mod trial;
mod verify;

pub use assignment::min_cost_assignment;
pub use cdf::{empirical_cdf, quantile, spurious_cdf, spurious_magnitudes, SpuriousCdf, CDF_POINTS};
pub use config::{check_grid, parse_grid, ExperimentConfig, SweepParam};
pub use output::{
    cdf_svg, line_plot_svg, read_sweep_csv, sweep_svg, write_auc_csv, write_cdf_csv, write_scores_csv, write_sweep_csv,
    Series,
};
pub use sweep::{compute_auc, run_sweep, MethodCurve, SweepResult, SweepRun};
pub use trial::{build_instance, estimate_order, run_trial, MethodOutcome, TrialInstance, TrialOutcome};
pub use verify::{check_decomposition, verify, CheckResult, CompanionDiagnostics, VerifyReport};

use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MODESCOPE_THREADS";

/// `requested` (or all available cores), capped by `MODESCOPE_THREADS`.
pub fn worker_count(requested: Option<usize>) -> usize {
    let base = requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => base.min(cap),
            _ => {
                log::warn!("ignoring {THREADS_ENV}={v:?}: expected a positive integer");
                base
            }
        },
        Err(_) => base,
    }
}

/// Runs trials on a private thread pool and returns results in index order.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let n = worker_count(threads);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {n} worker threads: {e}")))?;
        Ok(Runner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        use rayon::prelude::*;
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
