//! Ridge regression on a sketched, noised release of [A | b].

use ltm::experiments::{ridge_job, CalibrationPolicy, JobParams};

/// `(label, φ)` for a noiseless release and for two noise exponents.
pub fn run_example() -> ltm::Result<Vec<(String, f64)>> {
    let base = JobParams { n: 50_000, d: 5, m: 20, lambda: 10.0, mu2: Some(1.0), ..JobParams::default() };
    let mut out = vec![("no noise".to_string(), ridge_job(&JobParams { calibration: CalibrationPolicy::Zero, ..base.clone() })?.phi)];
    for p in [1.0, 0.5] {
        let job = JobParams { p, calibration: CalibrationPolicy::default(), ..base.clone() };
        out.push((format!("p = {p}"), ridge_job(&job)?.phi));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    for (label, phi) in run_example()? {
        println!("{label}: phi = {phi:.4}");
    }
    Ok(())
}
