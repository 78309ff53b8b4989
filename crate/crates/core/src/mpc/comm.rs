//! Communication accounting.

use serde::{Deserialize, Serialize};

/// Bytes moved by one run: every client sends `d·s` ring elements to each
/// server, and every server sends its `m×d` output share to the collector.
/// Headers are not counted. One MB is 10⁶ bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommReport {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub m: usize,
    pub servers: usize,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub total_bytes: u64,
}

pub const RING_BYTES: u64 = 8;

impl CommReport {
    pub fn for_params(n: usize, d: usize, s: usize, m: usize, servers: usize) -> Self {
        let input_bytes = n as u64 * d as u64 * s as u64 * RING_BYTES * servers as u64;
        let output_bytes = m as u64 * d as u64 * RING_BYTES * servers as u64;
        CommReport { n, d, s, m, servers, input_bytes, output_bytes, total_bytes: input_bytes + output_bytes }
    }

    pub fn total_mb(&self) -> f64 {
        self.total_bytes as f64 / 1e6
    }

    /// Total in MB with three decimals.
    pub fn total_mb_string(&self) -> String {
        format!("{}.{:03}", self.total_bytes / 1_000_000, (self.total_bytes % 1_000_000) / 1000)
    }
}
