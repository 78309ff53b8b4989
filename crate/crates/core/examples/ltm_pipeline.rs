//! Run the plaintext pipeline: randomize every client, sketch, release.

use ltm::mechanism::{ltm_pipeline, DataMatrix, NoiseMode, PipelineOptions};
use ltm::noise::{MechanismParams, NoiseCalibration, PrivacyBudget};
use ltm::rng::stream_rng;
use ltm::sketch::{sample_sketch, SketchSpec};
use nalgebra::DMatrix;
use rand::Rng;

pub struct PipelineSummary {
    pub noiseless_error: f64,
    pub per_client_noise_rms: f64,
    pub aggregated_noise_rms: f64,
    pub expected_rms: f64,
}

fn rms(m: &DMatrix<f64>) -> f64 {
    (m.norm_squared() / m.len() as f64).sqrt()
}

pub fn run_example() -> ltm::Result<PipelineSummary> {
    let (n, d, m) = (50_000, 8, 50);
    let mut rng = stream_rng(5, 0);
    let data = DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)), 1.0)?;
    let dec = sample_sketch(&SketchSpec::sparse(n, m, 1, 9))?;
    let clean = dec.apply_uniform(&data.joint())?;

    let opts = PipelineOptions::new(12);
    let silent = ltm_pipeline(&data, &dec, &NoiseCalibration::none(1.0), &opts)?;

    let params = MechanismParams { budget: PrivacyBudget::new(1.0, 1e-6), n, m, d, s: 1, t_clients: 0, eta: 1.0 };
    let cal = params.gaussian()?;
    let noisy = ltm_pipeline(&data, &dec, &cal, &opts)?;
    let fast = ltm_pipeline(&data, &dec, &cal, &PipelineOptions { noise_mode: NoiseMode::Aggregated, ..opts })?;

    Ok(PipelineSummary {
        noiseless_error: (&silent.sketch - &clean).amax(),
        per_client_noise_rms: rms(&(&noisy.sketch - &clean)),
        aggregated_noise_rms: rms(&(&fast.sketch - &clean)),
        expected_rms: (cal.variance() * (n / m) as f64).sqrt(),
    })
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let r = run_example()?;
    println!("noiseless release vs S·A: {:.2e}", r.noiseless_error);
    println!("noise rms per-client {:.3}, aggregated {:.3}, expected {:.3}", r.per_client_noise_rms, r.aggregated_noise_rms, r.expected_rms);
    Ok(())
}
