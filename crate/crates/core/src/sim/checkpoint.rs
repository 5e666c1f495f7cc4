//! Round checkpoint records and experiment summaries.
//!
//! Checkpoints are line-delimited JSON, one record per framework per round;
//! the summary is a single JSON document. Floats are quantized to nine
//! significant digits before serialization so output files diff cleanly.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfdlError};
use crate::sim::ledger::LinkLedger;

/// Per-group credibility entry of one sfdl round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRoundEntry {
    pub group_id: String,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub k: usize,
    pub weight: f64,
}

/// One framework's record for one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub framework: String,
    pub round: u64,
    pub loss: f64,
    pub prediction_error: f64,
    pub prediction_accuracy: f64,
    pub links_intra: u64,
    pub links_edge_global: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Digest of the aggregated global model after this round.
    pub global_digest: String,
    /// Digest of the training windows offered this round; equal across
    /// frameworks by the paired-data contract.
    pub batch_digest: String,
    /// Weighted group-loss objective; sfdl only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_objective: Option<f64>,
    /// Credibility state per group (empty for the baselines).
    pub groups: Vec<GroupRoundEntry>,
    /// Anomalies of the round, e.g. members skipped for missing data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Quantize to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor();
    let scale = 10f64.powf(8.0 - magnitude);
    (x * scale).round() / scale
}

impl RoundRecord {
    /// Apply the nine-significant-digit float policy to every float field.
    pub fn quantized(mut self) -> Self {
        self.loss = sig9(self.loss);
        self.prediction_error = sig9(self.prediction_error);
        self.prediction_accuracy = sig9(self.prediction_accuracy);
        self.global_objective = self.global_objective.map(sig9);
        for g in &mut self.groups {
            g.p = sig9(g.p);
            g.q = sig9(g.q);
            g.weight = sig9(g.weight);
        }
        self
    }
}

/// Final per-framework rollup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkSummary {
    pub framework: String,
    pub rounds: u64,
    pub final_loss: f64,
    pub final_prediction_error: f64,
    pub final_prediction_accuracy: f64,
    pub loss_curve: Vec<f64>,
    pub prediction_error_curve: Vec<f64>,
    pub accuracy_curve: Vec<f64>,
    pub cumulative_links: LinkLedger,
}

/// Whole-run summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub scenario_name: String,
    pub seed: u64,
    pub rounds: usize,
    pub param_dim: usize,
    pub frameworks: Vec<FrameworkSummary>,
}

/// Serialize records as JSON lines.
pub fn write_checkpoints<W: Write>(records: &[RoundRecord], mut out: W) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| SfdlError::Parse(e.to_string()))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSON-lines checkpoint stream.
pub fn read_checkpoints<R: BufRead>(input: R) -> Result<Vec<RoundRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RoundRecord = serde_json::from_str(&line)
            .map_err(|e| SfdlError::Parse(format!("checkpoint line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Load a checkpoint file.
pub fn load_checkpoints(path: &Path) -> Result<Vec<RoundRecord>> {
    let file = std::fs::File::open(path)?;
    read_checkpoints(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: u64) -> RoundRecord {
        RoundRecord {
            framework: "sfdl".into(),
            round,
            loss: 1.2345678912345,
            prediction_error: 0.000123456789123,
            prediction_accuracy: 0.5,
            links_intra: 14,
            links_edge_global: 2,
            bytes_up: 800,
            bytes_down: 800,
            global_digest: "abc".into(),
            batch_digest: "def".into(),
            global_objective: Some(0.25),
            warnings: Vec::new(),
            groups: vec![GroupRoundEntry {
                group_id: "g0".into(),
                p: 2.0,
                q: 1.0,
                n: 10,
                k: 10,
                weight: 0.667,
            }],
        }
    }

    #[test]
    fn sig9_keeps_nine_digits() {
        assert_eq!(sig9(1.2345678912345), 1.23456789);
        assert_eq!(sig9(0.000123456789123), 0.000123456789);
        assert_eq!(sig9(-987654321.987), -987654322.0);
        assert_eq!(sig9(0.0), 0.0);
        assert_eq!(sig9(1.0), 1.0);
    }

    #[test]
    fn jsonl_round_trip() {
        let records = vec![record(0).quantized(), record(1).quantized()];
        let mut buf = Vec::new();
        write_checkpoints(&records, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 2);
        let parsed = read_checkpoints(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn malformed_line_names_its_number() {
        let err = read_checkpoints(std::io::Cursor::new(b"{\"nope\": 1}\n".to_vec())).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
