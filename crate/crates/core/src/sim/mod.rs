//! Simulation harness: data generators for the null and the two
//! alternatives, and drivers for size, power, QQ and permutation studies.

mod config;
mod experiments;
mod generate;
pub mod ks;
pub mod output;

pub use config::{Scenario, SimConfig, FOLLOW_UP};
pub use experiments::{
    permutation_experiment, power_experiment, qq_experiment, run_replicate, size_experiment, terminal_cumulative,
    ExperimentOutput, PermutationResult, PowerOutput, QqSample, RatePoint, RejectionCurve, ReplicateTrace, StepStat,
    TidyRow,
};
pub use generate::{block_rng, generate_block, stream_block};
