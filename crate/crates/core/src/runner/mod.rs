//! Experiment configuration, training runs, metrics files and plot export.

pub mod config;
pub mod experiment;
pub mod export;
pub mod metrics;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::EnvError;
use crate::eval_stats::StatsError;
use crate::nn::NnError;
use crate::pg::PgError;
use crate::qlearn::QError;

pub use config::{defaults, Algorithm, ExperimentConfig, HyperParams, LearnerConfig};
pub use experiment::{evaluate, evaluate_checkpoint, random_baseline, run_experiment, EvalOutcome, Learner, Policy};
pub use export::{diagnose, early_late, entropy_curves, export, DiagnoseReport, ExportMetric, RunData};
pub use metrics::{read_metrics, write_metrics, MetricsEvent, MetricsHeader, MetricsWriter, RunInfo};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "MARL_LENS_THREADS";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("metrics step {step} precedes step {previous}")]
    OutOfOrder { step: u64, previous: u64 },
    #[error("encoding failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Q(#[from] QError),
    #[error(transparent)]
    Pg(#[from] PgError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Worker thread count: the available parallelism, capped by `MARL_LENS_THREADS`.
pub fn worker_threads() -> Result<usize, RunnerError> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| RunnerError::ConfigInvalid(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
            Ok(cap.min(available))
        }
        Err(_) => Ok(available),
    }
}

pub fn thread_pool() -> Result<rayon::ThreadPool, RunnerError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads()?)
        .build()
        .map_err(|e| RunnerError::ConfigInvalid(e.to_string()))
}
