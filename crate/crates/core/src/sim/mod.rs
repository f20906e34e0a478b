//! Scenario construction, fixed-step execution and trajectory recording.

pub mod config;
pub mod record;
pub mod runner;

pub use config::{
    preset, ArmConfig, GainsConfig, NoiseConfig, PegInCamera, RotationSpec, Scenario,
    ScenarioConfig, VisionConfig, PRESET_NAMES,
};
pub use record::{RunSummary, TrajectoryRecord, TrajectoryRow};
pub use runner::{
    compare_to_reference, monte_carlo, run, run_scenario, run_summary, ComparisonReport,
    MonteCarloSummary, Outcome, NOISE_PEAK_FACTOR,
};
