//! Secret-share client messages among three servers and compare with the
//! plaintext pipeline.

use ltm::mechanism::{ltm_pipeline, DataMatrix, PipelineOptions};
use ltm::mpc::{mpc_pipeline, CommReport, FixedPointCodec};
use ltm::noise::{MechanismParams, PrivacyBudget};
use ltm::rng::stream_rng;
use ltm::sketch::{sample_sketch, SketchSpec};
use nalgebra::DMatrix;
use rand::Rng;

pub struct MpcSummary {
    pub max_abs_diff: f64,
    pub quantization_bound: f64,
    pub traffic_mb: String,
    pub large_scale_mb: String,
}

pub fn run_example() -> ltm::Result<MpcSummary> {
    let (n, d, m, servers) = (20_000, 5, 20, 3);
    let mut rng = stream_rng(21, 0);
    let data = DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)), 1.0)?;
    let dec = sample_sketch(&SketchSpec::sparse(n, m, 1, 4))?;
    let cal = MechanismParams { budget: PrivacyBudget::new(1.0, 1e-6), n, m, d, s: 1, t_clients: 0, eta: 1.0 }.gaussian()?;
    let opts = PipelineOptions::new(8);

    let secure = mpc_pipeline(&data, &dec, &cal, FixedPointCodec::new(16)?, servers, &opts)?;
    let plain = ltm_pipeline(&data, &dec, &cal, &opts)?;
    Ok(MpcSummary {
        max_abs_diff: (&secure.sketch - &plain.sketch).amax(),
        quantization_bound: secure.quantization_bound,
        traffic_mb: secure.report.total_mb_string(),
        large_scale_mb: CommReport::for_params(500_000, 10, 1, 100, 3).total_mb_string(),
    })
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let r = run_example()?;
    println!("secure vs plaintext: {:.2e} (bound {:.2e})", r.max_abs_diff, r.quantization_bound);
    println!("traffic: {} MB; n=500000, d=10, m=100, 3 servers: {} MB", r.traffic_mb, r.large_scale_mb);
    Ok(())
}
