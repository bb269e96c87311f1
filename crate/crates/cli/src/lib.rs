//! Configuration, orchestration and serialization for the `mapper-diag` tool.

pub mod config;
pub mod export;
pub mod run;

pub use config::{resolve, Cli, ConfigError, Job, RunConfig, SweepConfig};
pub use run::{run_analysis, run_sweep, AnalysisResult, SweepRow};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const RUNTIME: i32 = 2;
}
