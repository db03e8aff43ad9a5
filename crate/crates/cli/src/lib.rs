//! Benchmark harness for the bregsplit solvers: generates the
//! fused-lasso-over-the-simplex experiment family, computes its constants,
//! produces gated reference solutions, and emits CSV convergence traces.

pub mod benchmark;
pub mod experiment;
pub mod reference;

pub use benchmark::{
    render_csv, run_benchmark, run_equality_benchmark, series_from_records, BenchmarkOutput,
    EqualityBenchmarkOutput, SeriesPoint,
};
pub use experiment::{
    generate_equality_instance, generate_instance, instance_from_parts, EqualityInstance,
    ExperimentConfig, ExperimentInstance,
};
pub use reference::{
    compute_reference, compute_reference_with, kkt_residual, proj_simplex, ReferenceSolution,
    KKT_GATE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed reference file: {0}")]
    Reference(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 invalid config, 3 numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Reference(_) => 1,
        }
    }
}
