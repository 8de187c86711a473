//! Experiment orchestration: TOML configuration, the seeded drop loop and
//! line-delimited result files.

pub mod compare;
pub mod config;
pub mod records;
pub mod run;

pub use compare::{compare, Comparison};
pub use config::{
    CsiMode, ExperimentConfig, MonteCarloConfig, OutputConfig, OutputFormat, PilotConfig, PolicyConfig, OUTPUT_DIR_ENV,
};
pub use records::{ExperimentResult, Metric, SummaryRow};
pub use run::{run, simulate_drop};
