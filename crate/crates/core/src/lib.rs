//! Credibility-aware swarm-federated learning simulator for vehicular
//! trajectory prediction.
//!
//! Vehicles train local trajectory predictors, merge them chain-wise inside
//! proximity-formed swarm groups, and a credibility-weighted federated
//! aggregation combines the group models at a central server. Two baseline
//! frameworks (plain federated averaging and fraction-selected federated
//! averaging) run over the same data for head-to-head comparison of
//! prediction quality and communication overhead.

pub mod credibility;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sim;
pub mod swarm;

pub use error::{Result, SfdlError};
pub use federation::Framework;
pub use model::{ParameterVector, PredictorConfig, TrajectorySample};
pub use sim::{run_experiment, Experiment, ExperimentReport, Scenario, SimConfig};
