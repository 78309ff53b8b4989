//! Client randomizers and the plaintext end-to-end pipeline.
//!
//! A client replicates its row `s` times, adds independent noise to each of the
//! `d·s` entries and hands the message to the aggregator, which applies the
//! public transform `T_S(y) = Σ_i S_i·y_i` over the stacked messages and then
//! rescales by `1/√s`. The plaintext path here computes exactly what the
//! secret-shared path in [`crate::mpc`] computes, without shares.

pub mod dump;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::noise::{FrequencyParams, NoiseCalibration, ThresholdContext};
use crate::rng::{client_rng, derive_seed, stream_rng};
use crate::sketch::SketchDecomposition;

/// Client data: one row per client, entries bounded by `eta`, and an optional
/// regression target bounded by the same `eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    a: DMatrix<f64>,
    eta: f64,
    target: Option<DVector<f64>>,
}

impl DataMatrix {
    pub fn new(a: DMatrix<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("eta={eta} must be positive")));
        }
        check_bound(a.iter(), eta, "data")?;
        Ok(DataMatrix { a, eta, target: None })
    }

    pub fn with_target(mut self, b: DVector<f64>) -> Result<Self> {
        if b.len() != self.a.nrows() {
            return Err(Error::shape(format!("target has {} entries for {} rows", b.len(), self.a.nrows())));
        }
        check_bound(b.iter(), self.eta, "target")?;
        self.target = Some(b);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn target(&self) -> Option<&DVector<f64>> {
        self.target.as_ref()
    }

    /// Width of a client's message before replication: `d`, or `d + 1` with a target.
    pub fn message_dim(&self) -> usize {
        self.d() + usize::from(self.target.is_some())
    }

    /// `[A | b]` when a target is present, otherwise `A`.
    pub fn joint(&self) -> DMatrix<f64> {
        match &self.target {
            None => self.a.clone(),
            Some(b) => {
                let mut out = self.a.clone().insert_column(self.d(), 0.0);
                out.set_column(self.d(), b);
                out
            }
        }
    }

    /// Row `j` of [`Self::joint`].
    pub fn joint_row(&self, j: usize) -> Vec<f64> {
        let mut row: Vec<f64> = self.a.row(j).iter().copied().collect();
        if let Some(b) = &self.target {
            row.push(b[j]);
        }
        row
    }
}

fn check_bound<'a>(values: impl Iterator<Item = &'a f64>, eta: f64, what: &str) -> Result<()> {
    for (i, &v) in values.enumerate() {
        if !v.is_finite() || v.abs() > eta {
            return Err(Error::InputBound(format!("{what} entry {i} = {v} exceeds eta={eta}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedMessage {
    pub payload: Vec<f64>,
    pub zeroed: bool,
}

impl RandomizedMessage {
    pub fn zeros(len: usize) -> Self {
        RandomizedMessage { payload: vec![0.0; len], zeroed: true }
    }
}

/// The client randomizer. `threshold` is `Some` on the sparse path, where the
/// public parameters may force an all-zeros message, and `None` on the dense
/// path, which never zeroes. Noise entry `e` of the message is the `e`-th draw
/// from `rng`.
pub fn randomize<R: Rng + ?Sized>(
    row: &[f64],
    cal: &NoiseCalibration,
    s: usize,
    threshold: Option<&ThresholdContext>,
    rng: &mut R,
) -> Result<RandomizedMessage> {
    check_bound(row.iter(), cal.eta(), "row")?;
    let len = row.len() * s;
    if threshold.is_some_and(ThresholdContext::zero_branch) {
        return Ok(RandomizedMessage::zeros(len));
    }
    let mut payload = Vec::with_capacity(len);
    for _ in 0..s {
        for &v in row {
            payload.push(v + cal.sample(rng));
        }
    }
    Ok(RandomizedMessage { payload, zeroed: false })
}

/// How the pipeline produces noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Every client samples its own noise from its own stream.
    #[default]
    PerClient,
    /// Each sketch entry receives one draw distributed as the sum of the noise
    /// of the clients that land on it. Same output distribution, far cheaper
    /// for large `n·d·s`; used by sweeps.
    Aggregated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    /// Zero-branch parameters for the sparse path; `None` disables the branch.
    pub threshold: Option<ThresholdContext>,
}

impl PipelineOptions {
    pub fn new(seed: u64) -> Self {
        PipelineOptions { seed, noise_mode: NoiseMode::PerClient, threshold: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    /// `m × message_dim` released sketch.
    pub sketch: DMatrix<f64>,
    pub zeroed: bool,
}

const CHUNK: usize = 2048;
const AGGREGATE_LABEL: u64 = 0x4147_4752;

/// `(1/√s)·Σ_i S_i·(A + G_i)` where `G_i` is the `i`-th noise block of every
/// client. Clients are streamed, so memory stays `O(m·d·s)`.
pub fn ltm_pipeline(
    data: &DataMatrix,
    dec: &SketchDecomposition,
    cal: &NoiseCalibration,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    if dec.n() != data.n() {
        return Err(Error::shape(format!("sketch has {} columns for {} clients", dec.n(), data.n())));
    }
    cal.validate()?;
    if cal.eta() < data.eta() {
        return Err(Error::param(format!(
            "calibration bound eta={} is below the data bound {}",
            cal.eta(),
            data.eta()
        )));
    }
    let dim = data.message_dim();
    // The branch depends only on public parameters, so it is decided once here.
    if opts.threshold.as_ref().is_some_and(ThresholdContext::zero_branch) {
        return Ok(PipelineOutput { sketch: DMatrix::zeros(dec.m(), dim), zeroed: true });
    }
    let sketch = match opts.noise_mode {
        NoiseMode::PerClient => per_client(data, dec, cal, opts.seed)?,
        NoiseMode::Aggregated => aggregated(data, dec, cal, opts.seed)?,
    };
    Ok(PipelineOutput { sketch, zeroed: false })
}

fn per_client(data: &DataMatrix, dec: &SketchDecomposition, cal: &NoiseCalibration, seed: u64) -> Result<DMatrix<f64>> {
    use rayon::prelude::*;
    let (m, s, dim) = (dec.m(), dec.s(), data.message_dim());
    let width = m * dim;
    let chunks: Vec<Result<Vec<CompensatedSum>>> = (0..data.n().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![CompensatedSum::default(); s * width];
            for j in c * CHUNK..((c + 1) * CHUNK).min(data.n()) {
                let mut rng = client_rng(seed, j);
                let msg = randomize(&data.joint_row(j), cal, s, None, &mut rng)?;
                scatter(dec, j, &msg.payload, dim, &mut acc);
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![CompensatedSum::default(); s * width];
    for chunk in chunks {
        for (t, v) in total.iter_mut().zip(chunk?) {
            t.add(v.value());
        }
    }
    Ok(finish(dec, &total, dim))
}

// acc layout: piece-major, then column, then sketch row.
fn scatter(dec: &SketchDecomposition, j: usize, payload: &[f64], dim: usize, acc: &mut [CompensatedSum]) {
    let m = dec.m();
    for (i, piece) in dec.pieces().iter().enumerate() {
        let row = piece.rows[j] as usize;
        let sign = f64::from(piece.signs[j]);
        let block = &payload[i * dim..(i + 1) * dim];
        let base = i * m * dim;
        for (c, &v) in block.iter().enumerate() {
            acc[base + c * m + row].add(sign * v);
        }
    }
}

fn finish(dec: &SketchDecomposition, acc: &[CompensatedSum], dim: usize) -> DMatrix<f64> {
    let m = dec.m();
    let mut out = DMatrix::<f64>::zeros(m, dim);
    for i in 0..dec.s() {
        let base = i * m * dim;
        for c in 0..dim {
            for r in 0..m {
                out[(r, c)] += acc[base + c * m + r].value();
            }
        }
    }
    out * dec.scale()
}

fn aggregated(data: &DataMatrix, dec: &SketchDecomposition, cal: &NoiseCalibration, seed: u64) -> Result<DMatrix<f64>> {
    let mut out = dec.apply_uniform(&data.joint())?;
    if !cal.is_zero() {
        out += aggregate_noise(dec, cal, data.message_dim(), seed);
    }
    Ok(out)
}

/// The noise term of the aggregated pipeline: `(1/√s)·Σ_i S_i·G_i` drawn one
/// sketch entry at a time. Adding it to `S·[A | b]` reproduces
/// [`ltm_pipeline`] in [`NoiseMode::Aggregated`] exactly.
pub fn aggregate_noise(dec: &SketchDecomposition, cal: &NoiseCalibration, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(derive_seed(seed, &[AGGREGATE_LABEL]), 0);
    let mut noise = DMatrix::<f64>::zeros(dec.m(), dim);
    if cal.is_zero() {
        return noise;
    }
    for loads in dec.piece_row_loads() {
        for c in 0..dim {
            for (r, &load) in loads.iter().enumerate() {
                noise[(r, c)] += cal.sample_sum(load, &mut rng);
            }
        }
    }
    noise * dec.scale()
}

/// Applies `T_S` to already randomized messages and rescales by `1/√s`.
/// All messages must agree on the zero flag.
pub fn transform_messages(dec: &SketchDecomposition, messages: &[RandomizedMessage], dim: usize) -> Result<DMatrix<f64>> {
    if messages.len() != dec.n() {
        return Err(Error::shape(format!("{} messages for {} sketch columns", messages.len(), dec.n())));
    }
    let zeroed = messages.first().is_some_and(|m| m.zeroed);
    if messages.iter().any(|m| m.zeroed != zeroed) {
        return Err(Error::Internal("clients disagree on the zero branch".into()));
    }
    let mut acc = vec![CompensatedSum::default(); dec.s() * dec.m() * dim];
    for (j, msg) in messages.iter().enumerate() {
        if msg.payload.len() != dim * dec.s() {
            return Err(Error::shape(format!("message {j} has {} entries, expected {}", msg.payload.len(), dim * dec.s())));
        }
        scatter(dec, j, &msg.payload, dim, &mut acc);
    }
    Ok(finish(dec, &acc, dim))
}

/// Randomizes every client with the same streams the per-client pipeline uses.
pub fn randomize_all(
    data: &DataMatrix,
    cal: &NoiseCalibration,
    s: usize,
    threshold: Option<&ThresholdContext>,
    seed: u64,
) -> Result<Vec<RandomizedMessage>> {
    (0..data.n())
        .map(|j| randomize(&data.joint_row(j), cal, s, threshold, &mut client_rng(seed, j)))
        .collect()
}

/// Stacks messages into the `n × (dim·s)` matrix of randomizer outputs.
pub fn stack_messages(messages: &[RandomizedMessage]) -> DMatrix<f64> {
    let width = messages.first().map_or(0, |m| m.payload.len());
    DMatrix::from_fn(messages.len(), width, |j, e| messages[j].payload[e])
}

/// `F_k = Σ |x_i|^k`.
pub fn frequency_moment(values: &[f64], k_power: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v.abs().powf(k_power));
    }
    acc.value()
}

/// `F̃_k = Σ_i (|x_i|^k + g_i)`: the all-ones transform over noisy powered
/// inputs. Client `i` draws `g_i` from its own stream.
pub fn frequency_pipeline(values: &[f64], params: &FrequencyParams, cal: &NoiseCalibration, seed: u64) -> Result<f64> {
    if values.len() != params.n {
        return Err(Error::shape(format!("{} values for n={}", values.len(), params.n)));
    }
    let mut acc = CompensatedSum::default();
    for (i, &x) in values.iter().enumerate() {
        if !x.is_finite() || x.abs() > params.big_delta {
            return Err(Error::InputBound(format!("value {i} = {x} outside [-{0}, {0}]", params.big_delta)));
        }
        acc.add(x.abs().powf(params.k_power) + cal.sample(&mut client_rng(seed, i)));
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFamily, PrivacyBudget};
    use crate::sketch::{sample_sketch, SketchPiece, SketchSpec};
    use crate::stats::mean_std;
    use rand_distr::StandardNormal;

    fn data(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = stream_rng(seed, 77);
        DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)), 1.0).unwrap()
    }

    #[test]
    fn replication_without_noise() {
        let mut rng = stream_rng(0, 0);
        let msg = randomize(&[1.0, 2.0], &NoiseCalibration::none(2.0), 3, None, &mut rng).unwrap();
        assert_eq!(msg.payload, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(!msg.zeroed);
    }

    #[test]
    fn threshold_zeroes_the_sparse_path_only() {
        let ctx = ThresholdContext { n: 1000, m: 100, d: 10, s: 1, delta: 0.01, t_clients: 0 };
        let cal = NoiseCalibration::Gaussian { sigma2: 1.0, eta: 1.0 };
        let mut rng = stream_rng(0, 0);
        let row = [0.5; 10];
        let msg = randomize(&row, &cal, 1, Some(&ctx), &mut rng).unwrap();
        assert!(msg.zeroed && msg.payload.iter().all(|&v| v == 0.0));
        assert!(!randomize(&row, &cal, 1, None, &mut rng).unwrap().zeroed);
    }

    #[test]
    fn out_of_bound_rows_are_rejected() {
        let mut rng = stream_rng(0, 0);
        let err = randomize(&[1.5], &NoiseCalibration::none(1.0), 1, None, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InputBound(_)));
        assert!(DataMatrix::new(DMatrix::from_element(2, 2, 3.0), 1.0).is_err());
    }

    #[test]
    fn zero_noise_gives_sketch_times_data() {
        let d = data(120, 3, 1);
        let dec = sample_sketch(&SketchSpec::sparse(120, 7, 3, 5)).unwrap();
        let out = ltm_pipeline(&d, &dec, &NoiseCalibration::none(1.0), &PipelineOptions::new(1)).unwrap();
        let direct = dec.assemble() * d.a();
        assert!((out.sketch - direct).abs().max() < 1e-12);
    }

    #[test]
    fn zero_data_zero_noise() {
        let d = DataMatrix::new(DMatrix::zeros(30, 2), 1.0).unwrap();
        let dec = sample_sketch(&SketchSpec::sparse(30, 4, 2, 0)).unwrap();
        let out = ltm_pipeline(&d, &dec, &NoiseCalibration::none(1.0), &PipelineOptions::new(0)).unwrap();
        assert_eq!(out.sketch, DMatrix::zeros(4, 2));
    }

    #[test]
    fn hand_assembled_product_with_logged_noise() {
        // n=4, d=1, m=2, s=1 with σ² = 1; recompute S·(A + G) from the logged
        // sketch and the per-client noise streams.
        let a = DMatrix::from_column_slice(4, 1, &[0.1, -0.4, 0.9, 0.3]);
        let d = DataMatrix::new(a.clone(), 1.0).unwrap();
        let dec = sample_sketch(&SketchSpec::sparse(4, 2, 1, 17)).unwrap();
        let cal = NoiseCalibration::Gaussian { sigma2: 1.0, eta: 1.0 };
        let out = ltm_pipeline(&d, &dec, &cal, &PipelineOptions::new(99)).unwrap();
        let g = DMatrix::from_fn(4, 1, |j, _| client_rng(99, j).sample::<f64, _>(StandardNormal));
        let expect = dec.assemble() * (a + g);
        assert!((out.sketch - expect).abs().max() < 1e-14);
    }

    #[test]
    fn pipeline_is_linear_in_the_data() {
        let (x, y) = (data(64, 2, 1), data(64, 2, 2));
        let sum = DataMatrix::new(x.a() + y.a(), 2.0).unwrap();
        let dec = sample_sketch(&SketchSpec::sparse(64, 5, 2, 3)).unwrap();
        let run = |d: &DataMatrix| {
            ltm_pipeline(d, &dec, &NoiseCalibration::none(2.0), &PipelineOptions::new(0)).unwrap().sketch
        };
        assert!((run(&sum) - run(&x) - run(&y)).abs().max() < 1e-12);
    }

    #[test]
    fn pipeline_matches_transform_of_messages() {
        let d = data(200, 3, 4).with_target(DVector::from_element(200, 0.5)).unwrap();
        let dec = sample_sketch(&SketchSpec::sparse(200, 9, 3, 8)).unwrap();
        let cal = NoiseCalibration::GammaDifference { gamma_shape: 0.05, gamma_scale: 2.0, eta: 1.0 };
        let out = ltm_pipeline(&d, &dec, &cal, &PipelineOptions::new(12)).unwrap();
        let msgs = randomize_all(&d, &cal, 3, None, 12).unwrap();
        let via = transform_messages(&dec, &msgs, 4).unwrap();
        assert!((out.sketch.clone() - via).abs().max() < 1e-12);
        // Same as apply over the stacked message blocks.
        let stacked = stack_messages(&msgs);
        let blocks: Vec<DMatrix<f64>> = (0..3).map(|i| stacked.columns(i * 4, 4).into_owned()).collect();
        assert!((out.sketch - dec.apply(&blocks).unwrap()).abs().max() < 1e-12);
    }

    #[test]
    fn mixed_zero_flags_are_an_internal_error() {
        let piece = SketchPiece { rows: vec![0, 0], signs: vec![1, 1] };
        let dec = SketchDecomposition::from_pieces(2, 1, vec![piece]).unwrap();
        let msgs = vec![RandomizedMessage::zeros(1), RandomizedMessage { payload: vec![1.0], zeroed: false }];
        assert!(matches!(transform_messages(&dec, &msgs, 1), Err(Error::Internal(_))));
    }

    #[test]
    fn zero_branch_releases_zeros() {
        let d = data(1000, 10, 0);
        let dec = sample_sketch(&SketchSpec::sparse(1000, 100, 1, 0)).unwrap();
        let cal = NoiseCalibration::Gaussian { sigma2: 1.0, eta: 1.0 };
        let ctx = ThresholdContext { n: 1000, m: 100, d: 10, s: 1, delta: 0.01, t_clients: 0 };
        let opts = PipelineOptions { threshold: Some(ctx), ..PipelineOptions::new(0) };
        let out = ltm_pipeline(&d, &dec, &cal, &opts).unwrap();
        assert!(out.zeroed);
        assert_eq!(out.sketch, DMatrix::zeros(100, 10));
    }

    #[test]
    fn entry_variance_follows_row_load() {
        let n = 60;
        let d = DataMatrix::new(DMatrix::zeros(n, 1), 1.0).unwrap();
        let dec = sample_sketch(&SketchSpec::sparse(n, 3, 2, 21)).unwrap();
        let cal = NoiseCalibration::Gaussian { sigma2: 0.5, eta: 1.0 };
        let loads = dec.row_loads();
        let trials = 4000;
        let mut samples = vec![Vec::with_capacity(trials); 3];
        for t in 0..trials {
            let out = ltm_pipeline(&d, &dec, &cal, &PipelineOptions::new(derive_seed(3, &[t as u64]))).unwrap();
            for r in 0..3 {
                samples[r].push(out.sketch[(r, 0)]);
            }
        }
        for r in 0..3 {
            let (_, sd) = mean_std(&samples[r]);
            let expect = loads[r] as f64 * 0.5 / 2.0;
            // Sample variance of a Gaussian has relative SE sqrt(2/trials) ≈ 2.2%.
            assert!((sd * sd / expect - 1.0).abs() < 0.12, "row {r}: {} vs {expect}", sd * sd);
        }
    }

    #[test]
    fn aggregated_mode_matches_per_client_moments() {
        let n = 400;
        let d = data(n, 1, 9);
        let dec = sample_sketch(&SketchSpec::dense(n, 4, 2)).unwrap();
        let cal = NoiseCalibration::GammaDifference { gamma_shape: 0.01, gamma_scale: 1.0, eta: 1.0 };
        let clean = dec.apply_uniform(d.a()).unwrap();
        let mut per = Vec::new();
        let mut agg = Vec::new();
        for t in 0..3000u64 {
            let opts = PipelineOptions::new(derive_seed(4, &[t]));
            per.push(ltm_pipeline(&d, &dec, &cal, &opts).unwrap().sketch[(0, 0)] - clean[(0, 0)]);
            let opts = PipelineOptions { noise_mode: NoiseMode::Aggregated, ..opts };
            agg.push(ltm_pipeline(&d, &dec, &cal, &opts).unwrap().sketch[(0, 0)] - clean[(0, 0)]);
        }
        // Row 0 collects n/m = 100 clients per piece over 4 pieces, scaled by 1/2:
        // variance 4·100·(2·0.01)/4 = 2.
        for xs in [&per, &agg] {
            let (mean, sd) = mean_std(xs);
            assert!(mean.abs() < 5.0 * sd / (xs.len() as f64).sqrt());
            assert!((sd * sd / 2.0 - 1.0).abs() < 0.15, "variance {}", sd * sd);
        }
    }

    #[test]
    fn frequency_pipeline_basics() {
        let p = FrequencyParams {
            family: NoiseFamily::Gaussian,
            big_delta: 1.0,
            k_power: 1.0,
            n: 3,
            budget: PrivacyBudget::new(1.0, 1e-3),
            sensitivity_exponent: None,
        };
        let v = frequency_pipeline(&[1.0, 1.0, 1.0], &p, &NoiseCalibration::none(1.0), 0).unwrap();
        assert_eq!(v, 3.0);
        assert!(matches!(
            frequency_pipeline(&[1.0, 2.0, 0.0], &p, &NoiseCalibration::none(1.0), 0),
            Err(Error::InputBound(_))
        ));
        assert_eq!(frequency_moment(&[-2.0, 1.0], 2.0), 5.0);
    }
}
