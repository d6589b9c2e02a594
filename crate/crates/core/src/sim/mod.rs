//! Scenario configuration, the simulation loop and metrics output.

pub mod config;
pub mod metrics;
pub mod run;

pub use config::{load_config, ScenarioConfig, UpdateMode};
pub use metrics::{
    cumulative_cost, emit_metrics, read_csv, spectrum_efficiency, write_csv, CostTerm,
    MetricsRecord, OutputFormat,
};
pub use run::{run_scenario, Simulation, StepReport};
