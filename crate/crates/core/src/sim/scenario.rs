//! Scenario files: the versioned schema describing one experiment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfdlError};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the trajectory data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DataSource {
    /// Generated highway tracks. `perturbation` scales speed wobble and
    /// lateral drift; zero gives exact constant-velocity tracks.
    Synthetic {
        #[serde(default = "default_perturbation")]
        perturbation: f64,
    },
    /// A trajectory CSV with the standard column set.
    TrajectoryCsv {
        path: String,
        /// Logical column name -> header in the file.
        #[serde(default)]
        column_map: BTreeMap<String, String>,
        /// Set when the file records feet instead of meters.
        #[serde(default)]
        feet_to_meters: bool,
    },
}

fn default_perturbation() -> f64 {
    1.0
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            perturbation: default_perturbation(),
        }
    }
}

/// A vehicle whose recorded observations are corrupted by zero-mean Gaussian
/// position noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyClient {
    pub vehicle_id: u64,
    pub noise_stddev_m: f64,
}

/// One experiment description. Serialized as JSON with a `schema_version`
/// field; see `Scenario::validate` for the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Intended swarm-group sizes; drives synthetic track placement.
    pub group_layout: Vec<usize>,
    pub total_vehicles: usize,
    pub rounds: usize,
    pub seed: u64,
    #[serde(default)]
    pub data_source: DataSource,
    #[serde(default)]
    pub noisy_clients: Vec<NoisyClient>,
    #[serde(default = "default_range")]
    pub distance_threshold: f64,
    #[serde(default = "default_range")]
    pub visual_range: f64,
}

fn default_range() -> f64 {
    100.0
}

impl Scenario {
    /// The named traffic-density presets: high {10, 6}, medium {6, 4},
    /// low {2, 3}.
    pub fn preset(name: &str) -> Result<Self> {
        let group_layout = match name {
            "high" => vec![10, 6],
            "medium" => vec![6, 4],
            "low" => vec![2, 3],
            other => {
                return Err(SfdlError::invalid(format!(
                    "unknown preset '{other}' (expected high, medium, or low)"
                )))
            }
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            name: format!("{name}-density"),
            total_vehicles: group_layout.iter().sum(),
            group_layout,
            rounds: 50,
            seed: 42,
            data_source: DataSource::default(),
            noisy_clients: Vec::new(),
            distance_threshold: default_range(),
            visual_range: default_range(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SfdlError::schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() {
            return Err(SfdlError::schema("scenario name must not be empty"));
        }
        if self.group_layout.is_empty() || self.group_layout.contains(&0) {
            return Err(SfdlError::schema("group_layout entries must be positive"));
        }
        let layout_total: usize = self.group_layout.iter().sum();
        if layout_total != self.total_vehicles {
            return Err(SfdlError::schema(format!(
                "group_layout sums to {layout_total} but total_vehicles is {}",
                self.total_vehicles
            )));
        }
        if self.rounds < 1 {
            return Err(SfdlError::schema("rounds must be >= 1"));
        }
        if self.distance_threshold.is_nan() || self.distance_threshold <= 0.0 {
            return Err(SfdlError::schema("distance_threshold must be > 0"));
        }
        if self.visual_range.is_nan() || self.visual_range <= 0.0 {
            return Err(SfdlError::schema("visual_range must be > 0"));
        }
        match &self.data_source {
            DataSource::Synthetic { perturbation } => {
                if !perturbation.is_finite() || *perturbation < 0.0 {
                    return Err(SfdlError::schema("perturbation must be finite and >= 0"));
                }
                for n in &self.noisy_clients {
                    if n.vehicle_id as usize >= self.total_vehicles {
                        return Err(SfdlError::schema(format!(
                            "noisy client {} is not one of the {} vehicles",
                            n.vehicle_id, self.total_vehicles
                        )));
                    }
                    if n.noise_stddev_m.is_nan() || n.noise_stddev_m <= 0.0 {
                        return Err(SfdlError::schema("noise_stddev_m must be > 0"));
                    }
                }
            }
            DataSource::TrajectoryCsv { path, .. } => {
                if path.is_empty() {
                    return Err(SfdlError::schema("trajectory-csv path must not be empty"));
                }
                if !self.noisy_clients.is_empty() {
                    return Err(SfdlError::schema(
                        "noisy_clients requires the synthetic data source",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(json).map_err(|e| SfdlError::schema(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }
}
