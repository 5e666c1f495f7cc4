//! Central-server aggregation and the two baseline frameworks.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::credibility::WeightVector;
use crate::error::{Result, SfdlError};
use crate::model::ParameterVector;
use crate::swarm::VehicleId;

/// The three frameworks the simulator compares head to head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    /// Swarm groups upload once each via their RSU; aggregation is
    /// credibility-weighted.
    Sfdl,
    /// Every vehicle uploads; unweighted mean.
    FedAvg,
    /// A fraction of vehicles is selected each round; unweighted mean.
    CommEfficient,
}

impl Framework {
    pub const ALL: [Framework; 3] = [Framework::Sfdl, Framework::FedAvg, Framework::CommEfficient];

    pub fn tag(&self) -> &'static str {
        match self {
            Framework::Sfdl => "sfdl",
            Framework::FedAvg => "fed-avg",
            Framework::CommEfficient => "comm-efficient",
        }
    }
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Framework {
    type Err = SfdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sfdl" => Ok(Framework::Sfdl),
            "fed-avg" | "fedavg" => Ok(Framework::FedAvg),
            "comm-efficient" => Ok(Framework::CommEfficient),
            other => Err(SfdlError::Parse(format!(
                "unknown framework '{other}' (expected sfdl, fed-avg, or comm-efficient)"
            ))),
        }
    }
}

/// Global model under one framework.
#[derive(Debug, Clone)]
pub struct GlobalModel {
    pub params: ParameterVector,
    pub round: u64,
    pub framework: Framework,
}

/// One model upload to the central server.
#[derive(Debug, Clone)]
pub struct Upload {
    /// Group or vehicle identifier.
    pub source_id: String,
    pub params: ParameterVector,
    /// Pre-normalized aggregation weight; 1/K uniform for the baselines.
    pub weight: f64,
    /// Round the upload belongs to; stale uploads are rejected.
    pub round: u64,
}

fn check_dims(uploads: &[Upload]) -> Result<usize> {
    let dim = uploads
        .first()
        .ok_or_else(|| SfdlError::invalid("aggregation over no uploads"))?
        .params
        .dim();
    for u in uploads {
        if u.params.dim() != dim {
            return Err(SfdlError::config(format!(
                "upload {} has dimension {} (expected {dim})",
                u.source_id,
                u.params.dim()
            )));
        }
    }
    Ok(dim)
}

fn weighted_sum(uploads: &[Upload], weights: &[f64], dim: usize) -> ParameterVector {
    let mut values = vec![0.0; dim];
    for (u, w) in uploads.iter().zip(weights) {
        for (acc, v) in values.iter_mut().zip(u.params.values()) {
            *acc += w * v;
        }
    }
    ParameterVector::new(values).expect("finite inputs keep the weighted sum finite")
}

/// Credibility-weighted aggregation: `sum(weight_k * params_k)` with weights
/// already normalized to sum 1.
pub fn aggregate_sfdl(uploads: &[Upload]) -> Result<ParameterVector> {
    let dim = check_dims(uploads)?;
    let total: f64 = uploads.iter().map(|u| u.weight).sum();
    if uploads.iter().any(|u| u.weight < 0.0) {
        return Err(SfdlError::invalid("upload weights must be nonnegative"));
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(SfdlError::invalid(format!(
            "upload weights must sum to 1 (got {total})"
        )));
    }
    let weights: Vec<f64> = uploads.iter().map(|u| u.weight).collect();
    Ok(weighted_sum(uploads, &weights, dim))
}

/// Unweighted mean of all uploads, computed as the weighted sum with uniform
/// weights so it is bit-identical to [`aggregate_sfdl`] at `weight = 1/K`.
pub fn aggregate_fedavg(uploads: &[Upload]) -> Result<ParameterVector> {
    let dim = check_dims(uploads)?;
    let weights = vec![1.0 / uploads.len() as f64; uploads.len()];
    Ok(weighted_sum(uploads, &weights, dim))
}

/// Draw `ceil(frac * n)` distinct clients uniformly without replacement.
pub fn select_clients(
    clients: &[VehicleId],
    frac: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<VehicleId>> {
    if clients.is_empty() {
        return Err(SfdlError::invalid("no clients to select from"));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(SfdlError::invalid(format!(
            "frac must be in (0, 1], got {frac}"
        )));
    }
    let count = ((frac * clients.len() as f64).ceil() as usize).min(clients.len());
    // partial Fisher-Yates over a copy
    let mut pool = clients.to_vec();
    for i in 0..count {
        let j = i + rng.random_range(0..pool.len() - i);
        pool.swap(i, j);
    }
    let mut selected = pool[..count].to_vec();
    selected.sort_unstable();
    Ok(selected)
}

/// Global objective: `(1/|SL|) * sum(weight_i * group_loss_i)`.
pub fn global_objective(group_losses: &[f64], weights: &WeightVector) -> Result<f64> {
    if group_losses.is_empty() {
        return Err(SfdlError::invalid("global objective over no groups"));
    }
    if group_losses.len() != weights.len() {
        return Err(SfdlError::invalid(format!(
            "{} group losses but {} weights",
            group_losses.len(),
            weights.len()
        )));
    }
    let acc: f64 = group_losses
        .iter()
        .zip(weights.weights())
        .map(|(l, w)| l * w)
        .sum();
    Ok(acc / group_losses.len() as f64)
}

/// Single logical aggregation actor for one framework instance. Buffers the
/// round's uploads and aggregates atomically at the round barrier.
#[derive(Debug, Clone)]
pub struct CentralServer {
    model: GlobalModel,
    pending: Vec<Upload>,
}

impl CentralServer {
    pub fn new(framework: Framework, initial: ParameterVector) -> Self {
        Self {
            model: GlobalModel {
                params: initial,
                round: 0,
                framework,
            },
            pending: Vec::new(),
        }
    }

    pub fn model(&self) -> &GlobalModel {
        &self.model
    }

    pub fn round(&self) -> u64 {
        self.model.round
    }

    /// Accept an upload for the current round; stale or future rounds are
    /// rejected.
    pub fn submit(&mut self, upload: Upload) -> Result<()> {
        if upload.round != self.model.round {
            return Err(SfdlError::invalid(format!(
                "upload from {} is for round {} but the server is at round {}",
                upload.source_id, upload.round, self.model.round
            )));
        }
        if upload.params.dim() != self.model.params.dim() {
            return Err(SfdlError::config("upload dimension mismatch"));
        }
        self.pending.push(upload);
        Ok(())
    }

    /// Aggregate the buffered uploads, advance the round, and broadcast the
    /// new model.
    pub fn aggregate(&mut self) -> Result<&GlobalModel> {
        let params = match self.model.framework {
            Framework::Sfdl => aggregate_sfdl(&self.pending)?,
            Framework::FedAvg | Framework::CommEfficient => aggregate_fedavg(&self.pending)?,
        };
        self.pending.clear();
        self.model.params = params;
        self.model.round += 1;
        Ok(&self.model)
    }
}
