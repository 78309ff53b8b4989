//! Additive secret sharing over `Z_{2^64}`.

use rand::Rng;

use crate::error::{Error, Result};

/// One server's shares of a matrix of ring elements, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareMatrix {
    pub server_id: u16,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl ShareMatrix {
    pub fn zeros(server_id: u16, rows: usize, cols: usize) -> Self {
        ShareMatrix { server_id, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Splits every element of `plain` into `servers` shares: the first
/// `servers − 1` are uniform, the last completes the sum.
pub fn share<R: Rng + ?Sized>(plain: &[u64], servers: usize, rng: &mut R) -> Result<Vec<Vec<u64>>> {
    if servers < 2 {
        return Err(Error::param(format!("sharing needs at least 2 servers, got {servers}")));
    }
    let mut out: Vec<Vec<u64>> = (0..servers - 1)
        .map(|_| (0..plain.len()).map(|_| rng.random::<u64>()).collect())
        .collect();
    let last = plain
        .iter()
        .enumerate()
        .map(|(e, &v)| out.iter().fold(v, |acc, sh| acc.wrapping_sub(sh[e])))
        .collect();
    out.push(last);
    Ok(out)
}

/// Ring sum of all shares.
pub fn reconstruct(shares: &[Vec<u64>]) -> Vec<u64> {
    let len = shares.first().map_or(0, Vec::len);
    (0..len).map(|e| shares.iter().fold(0u64, |acc, sh| acc.wrapping_add(sh[e]))).collect()
}
