//! Config-driven Monte Carlo experiments, one-shot detection on files, and the
//! plain-text data formats they use.

mod config;
mod detect;
mod experiment;
pub mod io;

pub use config::{
    DetectorKind, DetectorSpec, ExperimentConfig, NwldThreshold, OptimizeSection, OutputFormat,
    PriorSpec, Threads, WeightSource,
};
pub use detect::{detect_once, fixpoint_debug, DetectionReport, FixpointReport, WeightInput};
pub use experiment::{run_experiment, write_results, ExperimentOutput, ResultRow, CSV_HEADER};

/// Runs `f` on a rayon pool with the requested worker count.
pub fn with_threads<R: Send>(threads: Threads, f: impl FnOnce() -> R + Send) -> crate::Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Threads::Fixed(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| crate::Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
