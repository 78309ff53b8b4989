//! Private rank-k approximation of spectral-gap data, with and without noise.

use ltm::experiments::{lowrank_job, CalibrationPolicy, JobParams};

pub fn run_example() -> ltm::Result<(f64, f64)> {
    let base = JobParams { n: 100_000, d: 20, k: 3, m: 20, epsilon: 1.0, ..JobParams::default() };
    let exact = lowrank_job(&JobParams { calibration: CalibrationPolicy::Zero, ..base.clone() })?;
    let private = lowrank_job(&JobParams { calibration: CalibrationPolicy::default(), ..base })?;
    Ok((exact.psi, private.psi))
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let (exact, private) = run_example()?;
    println!("psi without noise: {exact:.3e}");
    println!("psi with per-entry noise at eps=1: {private:.4}");
    Ok(())
}
