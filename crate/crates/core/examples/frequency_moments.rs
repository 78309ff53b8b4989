//! Private second frequency moment with Gaussian and gamma-difference noise.

use ltm::experiments::{frequency_job, JobParams};
use ltm::noise::NoiseFamily;

pub fn run_example() -> ltm::Result<Vec<(NoiseFamily, f64, f64)>> {
    let mut out = Vec::new();
    for family in [NoiseFamily::Gaussian, NoiseFamily::GammaDifference] {
        let job = JobParams { n: 20_000, k_power: 2.0, big_delta: 1.0, epsilon: 1.0, family, ..JobParams::default() };
        let r = frequency_job(&job)?;
        out.push((family, r.exact, r.estimate));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    for (family, exact, estimate) in run_example()? {
        println!("{family:?}: F_2 = {exact:.2}, private estimate = {estimate:.2}");
    }
    Ok(())
}
