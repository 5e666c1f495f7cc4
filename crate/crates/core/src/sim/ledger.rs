//! Communication-link and byte accounting.

use serde::{Deserialize, Serialize};

use crate::sim::data::WIRE_BYTES_PER_PARAM;

/// Cumulative link/byte counters for one framework within a run.
///
/// Edge-to-global links are two-way channels between an uploader (a group's
/// RSU, or an individual client in the baselines) and the central server;
/// bytes count one model of `dim` parameters at 4 bytes each per direction
/// per link. Intra-group links are the pairwise chain hops inside groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkLedger {
    pub intra_group_links: u64,
    pub edge_to_global_links: u64,
    pub total_two_way_links: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

/// One round's increments, also the per-record checkpoint payload.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLinks {
    pub intra_group_links: u64,
    pub edge_to_global_links: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

impl LinkLedger {
    /// Account one round: `intra` chain hops, `edge_to_global` uploader
    /// channels, each channel carrying one `dim`-parameter model both ways.
    pub fn record_round(&mut self, intra: u64, edge_to_global: u64, dim: usize) -> RoundLinks {
        let model_bytes = dim as u64 * WIRE_BYTES_PER_PARAM;
        let round = RoundLinks {
            intra_group_links: intra,
            edge_to_global_links: edge_to_global,
            bytes_up: edge_to_global * model_bytes,
            bytes_down: edge_to_global * model_bytes,
        };
        self.intra_group_links += round.intra_group_links;
        self.edge_to_global_links += round.edge_to_global_links;
        self.total_two_way_links += round.intra_group_links + round.edge_to_global_links;
        self.bytes_up += round.bytes_up;
        self.bytes_down += round.bytes_down;
        round
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates_monotonically() {
        let mut ledger = LinkLedger::default();
        let r1 = ledger.record_round(14, 2, 100);
        assert_eq!(r1.edge_to_global_links, 2);
        assert_eq!(r1.bytes_up, 2 * 100 * 4);
        assert_eq!(r1.bytes_down, 2 * 100 * 4);
        let before = ledger;
        ledger.record_round(14, 2, 100);
        assert!(ledger.intra_group_links > before.intra_group_links);
        assert_eq!(ledger.total_two_way_links, 2 * 16);
        assert_eq!(ledger.bytes_up, 2 * r1.bytes_up);
    }
}
