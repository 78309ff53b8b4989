//! The plaintext, aggregated and secret-shared paths agree, on both sketch
//! shapes, and with or without a regression target.

use ltm::mechanism::{ltm_pipeline, randomize_all, stack_messages, transform_messages, DataMatrix, NoiseMode, PipelineOptions};
use ltm::mpc::wire::{read_shares, write_shares, WireHeader};
use ltm::mpc::{mpc_pipeline, share_rows, FixedPointCodec};
use ltm::noise::{MechanismParams, NoiseCalibration, PrivacyBudget};
use ltm::rng::stream_rng;
use ltm::sketch::{pad_rows, sample_sketch, SketchSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn uniform(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0))
}

fn gaussian(n: usize, m: usize, d: usize, s: usize) -> NoiseCalibration {
    MechanismParams { budget: PrivacyBudget::new(1.0, 1e-6), n, m, d, s, t_clients: 0, eta: 1.0 }.gaussian().unwrap()
}

#[test]
fn streaming_pipeline_equals_explicit_transform_of_messages() {
    let (n, d, m, s) = (3_000, 3, 12, 3);
    let data = DataMatrix::new(uniform(n, d, 1), 1.0).unwrap();
    let dec = sample_sketch(&SketchSpec::sparse(n, m, s, 2)).unwrap();
    let cal = gaussian(n, m, d, s);
    let opts = PipelineOptions::new(5);
    let streamed = ltm_pipeline(&data, &dec, &cal, &opts).unwrap().sketch;
    let messages = randomize_all(&data, &cal, s, None, opts.seed).unwrap();
    let explicit = transform_messages(&dec, &messages, d).unwrap();
    assert!((&streamed - &explicit).amax() < 1e-9);
    assert_eq!(stack_messages(&messages).shape(), (n, d * s));
}

#[test]
fn regression_target_is_randomized_jointly() {
    let (n, d, m) = (4_000, 4, 16);
    let b = DVector::from_fn(n, |i, _| ((i % 7) as f64 - 3.0) / 3.0);
    let data = DataMatrix::new(uniform(n, d, 3), 1.0).unwrap().with_target(b).unwrap();
    let dec = sample_sketch(&SketchSpec::sparse(n, m, 1, 4)).unwrap();
    let out = ltm_pipeline(&data, &dec, &NoiseCalibration::none(1.0), &PipelineOptions::new(0)).unwrap();
    assert_eq!(out.sketch.ncols(), d + 1);
    assert!((&out.sketch - dec.apply_uniform(&data.joint()).unwrap()).amax() < 1e-12);
}

#[test]
fn dense_gamma_path_matches_mpc() {
    let (n, d, m) = (1_200, 2, 6);
    let a = pad_rows(&uniform(n - 5, d, 6), m);
    assert_eq!(a.nrows(), n);
    let data = DataMatrix::new(a, 1.0).unwrap();
    let dec = sample_sketch(&SketchSpec::dense(n, m, 7)).unwrap();
    let cal = MechanismParams { budget: PrivacyBudget::new(1.0, 0.0), n, m, d, s: m, t_clients: 0, eta: 1.0 }.gamma().unwrap();
    let opts = PipelineOptions::new(8);
    let plain = ltm_pipeline(&data, &dec, &cal, &opts).unwrap();
    let secure = mpc_pipeline(&data, &dec, &cal, FixedPointCodec::new(12).unwrap(), 3, &opts).unwrap();
    assert_eq!(secure.clipped, 0);
    assert!((&plain.sketch - &secure.sketch).amax() <= secure.quantization_bound);
}

#[test]
fn aggregated_noise_has_per_client_variance() {
    let (n, d, m) = (20_000, 5, 20);
    let data = DataMatrix::new(DMatrix::zeros(n, d), 1.0).unwrap();
    let dec = sample_sketch(&SketchSpec::sparse(n, m, 1, 9)).unwrap();
    let cal = gaussian(n, m, d, 1);
    let mut per = 0.0;
    let mut agg = 0.0;
    for seed in 0..20 {
        let o = PipelineOptions::new(seed);
        per += ltm_pipeline(&data, &dec, &cal, &o).unwrap().sketch.norm_squared();
        let o = PipelineOptions { noise_mode: NoiseMode::Aggregated, ..o };
        agg += ltm_pipeline(&data, &dec, &cal, &o).unwrap().sketch.norm_squared();
    }
    let want = 20.0 * (m * d) as f64 * cal.variance() * (n / m) as f64;
    assert!((per / want - 1.0).abs() < 0.1, "per-client {}", per / want);
    assert!((agg / want - 1.0).abs() < 0.1, "aggregated {}", agg / want);
}

#[test]
fn zero_branch_releases_zeros_on_every_path() {
    let (n, d, m) = (500, 3, 40);
    let data = DataMatrix::new(uniform(n, d, 10), 1.0).unwrap();
    let dec = sample_sketch(&SketchSpec::sparse(n, m, 1, 11)).unwrap();
    let params = MechanismParams { budget: PrivacyBudget::new(1.0, 1e-6), n, m, d, s: 1, t_clients: 0, eta: 1.0 };
    let opts = PipelineOptions { threshold: Some(params.threshold()), ..PipelineOptions::new(12) };
    let cal = NoiseCalibration::Gaussian { sigma2: 1.0, eta: 1.0 };
    let plain = ltm_pipeline(&data, &dec, &cal, &opts).unwrap();
    let secure = mpc_pipeline(&data, &dec, &cal, FixedPointCodec::new(16).unwrap(), 2, &opts).unwrap();
    assert!(plain.zeroed && secure.zeroed);
    assert_eq!(plain.sketch.amax(), 0.0);
    assert_eq!(secure.sketch.amax(), 0.0);
}

#[test]
fn shares_survive_the_wire_format() {
    let mut rng = stream_rng(13, 0);
    let plain: Vec<Vec<u64>> = (0..50).map(|_| (0..6).map(|_| rng.random()).collect()).collect();
    let parts = share_rows(&plain, 3, &mut rng).unwrap();
    let mut decoded = Vec::new();
    for (id, part) in parts.iter().enumerate() {
        let header = WireHeader { n: 50, d: 3, s: 2, frac_bits: 16, server_id: id as u16 };
        let mut buf = Vec::new();
        write_shares(&mut buf, &header, part).unwrap();
        let (h, back) = read_shares(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        decoded.push(back);
    }
    let flat: Vec<u64> = plain.concat();
    assert_eq!(ltm::mpc::reconstruct_matrices(&decoded), flat);
}
