//! Calibrate per-client noise for both families and look at the aggregate.

use ltm::noise::{MechanismParams, NoiseFamily, PrivacyBudget};
use ltm::rng::stream_rng;
use ltm::stats::mean_std;
use ltm::Error;

pub struct CalibrationSummary {
    pub sigma2: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    /// Empirical variance of a sum over `n/m` clients divided by its target.
    pub aggregate_ratio: f64,
    pub small_n_rejected: bool,
}

pub fn run_example() -> ltm::Result<CalibrationSummary> {
    let params = MechanismParams {
        budget: PrivacyBudget::new(1.0, 0.01),
        n: 1_000_000,
        m: 100,
        d: 10,
        s: 1,
        t_clients: 0,
        eta: 1.0,
    };
    let gauss = params.gaussian()?;
    let gamma = params.gamma()?;
    let sigma2 = gauss.variance();
    let (gamma_shape, gamma_scale) = match gamma {
        ltm::noise::NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, .. } => (gamma_shape, gamma_scale),
        _ => unreachable!(),
    };

    // a sketch entry collects about n/m clients
    let load = params.n / params.m;
    let mut rng = stream_rng(3, 0);
    let sums: Vec<f64> = (0..20_000).map(|_| gauss.sample_sum(load, &mut rng)).collect();
    let (_, sd) = mean_std(&sums);
    let aggregate_ratio = sd * sd / (sigma2 * load as f64);

    let tiny = MechanismParams { n: 5_000, ..params };
    let small_n_rejected = matches!(tiny.calibrate(NoiseFamily::Gaussian), Err(Error::ThresholdRegime(_)));

    Ok(CalibrationSummary { sigma2, gamma_shape, gamma_scale, aggregate_ratio, small_n_rejected })
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let r = run_example()?;
    println!("gaussian per-client sigma^2 = {:.5}", r.sigma2);
    println!("gamma-difference shape = {:.3e}, scale = {:.1}", r.gamma_shape, r.gamma_scale);
    println!("aggregate variance / target = {:.3}", r.aggregate_ratio);
    println!("n = 5000 falls in the threshold regime: {}", r.small_n_rejected);
    Ok(())
}
