//! Scenario construction, round orchestration, and communication accounting.

pub mod checkpoint;
pub mod data;
pub mod ledger;
pub mod runner;
pub mod scenario;

pub use checkpoint::{ExperimentSummary, FrameworkSummary, GroupRoundEntry, RoundRecord};
pub use data::{generate_synthetic, ingest_trajectory_csv, TrajectoryDataset, TrajectoryRecord};
pub use ledger::{LinkLedger, RoundLinks};
pub use runner::{run_experiment, write_report, Experiment, ExperimentReport, SimConfig};
pub use scenario::{DataSource, NoisyClient, Scenario};
