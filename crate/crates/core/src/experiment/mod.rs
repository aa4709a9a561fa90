//! Seeded Monte Carlo harness behind the command-line interface.
//!
//! Every trial draws from its own generator, derived from the master seed,
//! the parameter point and the trial index, so results do not depend on how
//! trials are scheduled across threads.

mod config;
mod output;
mod runs;

use thiserror::Error;

use crate::linalg::SeededRng;

pub use config::{Algorithm, Experiment, ExperimentConfig, XCondition};
pub use output::{run_to_writer, write_csv};
pub use runs::{
    binomial_ci95, run_maxdet, run_sample_size, run_ser, run_success, run_theory, success_trial,
    success_trials, MaxDetRecord, SampleSizeRecord, SerRecord, SuccessPoint, SuccessRecord,
    SuccessTrial, TheoryRecord,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// How independent trials are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Data-parallel over trials; `threads` bounds the worker pool. Without
    /// the `parallel` feature this runs sequentially.
    Parallel {
        threads: Option<usize>,
    },
}

impl Execution {
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Execution::Sequential,
            threads => Execution::Parallel { threads },
        }
    }

    /// `f(0), …, f(count − 1)` in index order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel { threads } => parallel_map(count, threads, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(count: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..count).into_par_iter().map(&f).collect();
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("falling back to the global pool: {e}");
                run()
            }
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(count: usize, _threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Generator for trial `trial` of parameter point `point`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> SeededRng {
    SeededRng::new(seed).derive((point << 32) ^ trial)
}
