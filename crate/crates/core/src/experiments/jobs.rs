//! Single end-to-end runs: one data set, one sketch, one release, one report.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{lowrank_project, ridge_from_joint, ridge_solve, RankKProjection};
use crate::error::{Error, Result};
use crate::experiments::calibration::{calibrate, CalibrationPolicy, SketchShape};
use crate::experiments::metrics::{metric_phi, psi_from_gram};
use crate::experiments::synthetic::{gen_lowrank, gen_regression, SyntheticSpec};
use crate::linalg::{gram, top_eigen_sym};
use crate::mechanism::{frequency_moment, frequency_pipeline, ltm_pipeline, DataMatrix, NoiseMode, PipelineOptions};
use crate::mpc::{mpc_pipeline, CommReport, FixedPointCodec};
use crate::noise::{frequency_noise, FrequencyParams, NoiseCalibration, NoiseFamily, PrivacyBudget};
use crate::rng::{derive_seed, stream_rng, DEFAULT_MASTER_SEED};
use crate::sketch::{row_load_tail_bound, row_loads_violate, sample_sketch, SketchDecomposition, SketchSpec};

const DATA_LABEL: u64 = 0x4a44_4154;
const SKETCH_LABEL: u64 = 0x4a53_4b54;
const NOISE_LABEL: u64 = 0x4a4e_4f49;

/// Parameters shared by every job. Fields a job does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub s: usize,
    /// Use the dense sketch (`s = m`, zero-padding `n` to a multiple of `m`).
    pub dense: bool,
    pub epsilon: f64,
    pub delta: f64,
    pub family: NoiseFamily,
    pub calibration: CalibrationPolicy,
    /// Noise exponent on the interpolation path; `1` is the LTM calibration.
    pub p: f64,
    /// Entry bound. Defaults to the largest magnitude in the data.
    pub eta: Option<f64>,
    pub lambda: f64,
    /// Prior variance of planted coefficients; `n` when absent.
    pub mu2: Option<f64>,
    /// Frequency moment order.
    pub k_power: f64,
    /// Range of frequency-moment inputs.
    pub big_delta: f64,
    pub servers: usize,
    pub frac_bits: u8,
    /// Communication report only, without running the protocol.
    pub report_only: bool,
    pub seed: u64,
}

impl Default for JobParams {
    fn default() -> Self {
        JobParams {
            n: 100_000,
            d: 10,
            k: 2,
            m: 50,
            s: 1,
            dense: false,
            epsilon: 1.0,
            delta: 1e-6,
            family: NoiseFamily::Gaussian,
            calibration: CalibrationPolicy::Formal { t_clients: 0 },
            p: 1.0,
            eta: None,
            lambda: 10.0,
            mu2: None,
            k_power: 2.0,
            big_delta: 1.0,
            servers: 3,
            frac_bits: 16,
            report_only: false,
            seed: DEFAULT_MASTER_SEED,
        }
    }
}

impl JobParams {
    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget::new(self.epsilon, self.delta)
    }

    fn sketch_spec(&self, n: usize) -> SketchSpec {
        let seed = derive_seed(self.seed, &[SKETCH_LABEL]);
        if self.dense {
            SketchSpec::dense(n.div_ceil(self.m) * self.m, self.m, seed)
        } else {
            SketchSpec::sparse(n, self.m, self.s, seed)
        }
    }

    fn data_seed(&self) -> u64 {
        derive_seed(self.seed, &[DATA_LABEL])
    }

    /// Applies the `eta` override, which may only loosen the data bound.
    fn bound(&self, data: DataMatrix) -> Result<DataMatrix> {
        match self.eta {
            None => Ok(data),
            Some(eta) => {
                let out = DataMatrix::new(data.a().clone(), eta)?;
                match data.target() {
                    Some(b) => out.with_target(b.clone()),
                    None => Ok(out),
                }
            }
        }
    }
}

/// Zero-pads clients when the sketch is dense.
fn padded(data: &DataMatrix, n: usize) -> Result<std::borrow::Cow<'_, DataMatrix>> {
    if data.n() == n {
        return Ok(std::borrow::Cow::Borrowed(data));
    }
    let mut out = DataMatrix::new(pad_to(data.a(), n), data.eta())?;
    if let Some(b) = data.target() {
        let mut padded_b = DVector::zeros(n);
        padded_b.rows_mut(0, b.len()).copy_from(b);
        out = out.with_target(padded_b)?;
    }
    Ok(std::borrow::Cow::Owned(out))
}

fn pad_to(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out
}

/// Sketch, calibrate and release `data`.
fn release(job: &JobParams, data: &DataMatrix) -> Result<(SketchDecomposition, NoiseCalibration, DMatrix<f64>, bool)> {
    let spec = job.sketch_spec(data.n());
    let dec = sample_sketch(&spec)?;
    let data = padded(data, spec.n)?;
    let shape = SketchShape { n: spec.n, m: spec.m, s: spec.s, dim: data.message_dim() };
    let cal = calibrate(job.calibration, job.family, job.budget(), shape, data.eta(), job.p)?;
    let mut opts = PipelineOptions::new(derive_seed(job.seed, &[NOISE_LABEL]));
    opts.noise_mode = NoiseMode::Aggregated;
    let out = ltm_pipeline(&data, &dec, &cal, &opts)?;
    Ok((dec, cal, out.sketch, out.zeroed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowrankReport {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub s: usize,
    pub eta: f64,
    pub calibration: NoiseCalibration,
    pub psi: f64,
    pub projection: RankKProjection,
}

/// Spectral-gap data, LTM release, rank-`k` projection, ψ.
pub fn lowrank_job(job: &JobParams) -> Result<LowrankReport> {
    let data = job.bound(gen_lowrank(&SyntheticSpec::lowrank(job.n, job.d, job.k, job.data_seed()))?)?;
    let (dec, calibration, y, _) = release(job, &data)?;
    let g = gram(data.a());
    let (_, x_opt) = top_eigen_sym(&g, job.k);
    let projection = lowrank_project(&y, job.k)?;
    let psi = psi_from_gram(&g, data.n(), &projection.basis, &x_opt)?;
    Ok(LowrankReport { n: data.n(), d: data.d(), k: job.k, m: dec.m(), s: dec.s(), eta: data.eta(), calibration, psi, projection })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RidgeReport {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    pub lambda: f64,
    pub mu2: f64,
    pub eta: f64,
    pub calibration: NoiseCalibration,
    pub phi: f64,
    pub x: Vec<f64>,
    pub x_opt: Vec<f64>,
}

/// Planted regression data, LTM release of `[A | b]`, ridge solve, φ.
pub fn ridge_job(job: &JobParams) -> Result<RidgeReport> {
    let mu2 = job.mu2.unwrap_or(job.n as f64);
    let data = job.bound(gen_regression(&SyntheticSpec::regression(job.n, job.d, mu2, job.data_seed()))?.data)?;
    let (dec, calibration, y, _) = release(job, &data)?;
    let (a, b) = (data.a(), data.target().expect("regression data has a target"));
    let x_opt = ridge_solve(a, b, job.lambda)?.x;
    let x = ridge_from_joint(&y, job.lambda)?.x;
    let phi = metric_phi(a, b, &x, &x_opt, job.lambda)?;
    Ok(RidgeReport {
        n: data.n(),
        d: data.d(),
        m: dec.m(),
        s: dec.s(),
        lambda: job.lambda,
        mu2,
        eta: data.eta(),
        calibration,
        phi,
        x: x.iter().copied().collect(),
        x_opt: x_opt.iter().copied().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub n: usize,
    pub k_power: f64,
    pub big_delta: f64,
    pub calibration: NoiseCalibration,
    pub exact: f64,
    pub estimate: f64,
    pub error: f64,
}

/// `F_k` of `n` values drawn uniformly from `[0, Δ]`, estimated from noisy
/// client contributions.
pub fn frequency_job(job: &JobParams) -> Result<FrequencyReport> {
    let mut rng = stream_rng(job.data_seed(), 0);
    let values: Vec<f64> = (0..job.n).map(|_| rng.random_range(0.0..=job.big_delta)).collect();
    let params = FrequencyParams {
        family: job.family,
        big_delta: job.big_delta,
        k_power: job.k_power,
        n: job.n,
        budget: job.budget(),
        sensitivity_exponent: None,
    };
    let calibration = match job.calibration {
        CalibrationPolicy::Zero => NoiseCalibration::none(job.big_delta.powf(job.k_power)),
        _ => frequency_noise(&params)?,
    };
    let exact = frequency_moment(&values, job.k_power);
    let estimate = frequency_pipeline(&values, &params, &calibration, derive_seed(job.seed, &[NOISE_LABEL]))?;
    Ok(FrequencyReport { n: job.n, k_power: job.k_power, big_delta: job.big_delta, calibration, exact, estimate, error: estimate - exact })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MpcDemoReport {
    pub report: CommReport,
    pub total_mb: String,
    /// Largest entrywise gap to the plaintext pipeline, when the protocol ran.
    pub max_abs_diff: Option<f64>,
    pub quantization_bound: Option<f64>,
    pub clip_rate: Option<f64>,
    pub calibration: Option<NoiseCalibration>,
}

/// Communication accounting and, unless `report_only`, a full secret-shared
/// run on uniform data in `[−η, η]` checked against the plaintext pipeline.
pub fn mpc_demo_job(job: &JobParams) -> Result<MpcDemoReport> {
    let spec = job.sketch_spec(job.n);
    spec.validate()?;
    let report = CommReport::for_params(spec.n, job.d, spec.s, spec.m, job.servers);
    let total_mb = report.total_mb_string();
    if job.report_only {
        return Ok(MpcDemoReport { report, total_mb, max_abs_diff: None, quantization_bound: None, clip_rate: None, calibration: None });
    }
    let eta = job.eta.unwrap_or(1.0);
    let mut rng = stream_rng(job.data_seed(), 0);
    let a = DMatrix::from_fn(job.n, job.d, |_, _| rng.random_range(-eta..=eta));
    let data = DataMatrix::new(a, eta)?;
    let dec = sample_sketch(&spec)?;
    let data = padded(&data, spec.n)?;
    let shape = SketchShape { n: spec.n, m: spec.m, s: spec.s, dim: data.message_dim() };
    let cal = calibrate(job.calibration, job.family, job.budget(), shape, eta, job.p)?;
    let opts = PipelineOptions::new(derive_seed(job.seed, &[NOISE_LABEL]));
    let codec = FixedPointCodec::new(job.frac_bits)?;
    let secure = mpc_pipeline(&data, &dec, &cal, codec, job.servers, &opts)?;
    let plain = ltm_pipeline(&data, &dec, &cal, &opts)?;
    let max_abs_diff = (&secure.sketch - &plain.sketch).amax();
    if secure.report != report {
        return Err(Error::Internal("protocol traffic disagrees with the accounting".into()));
    }
    Ok(MpcDemoReport {
        report,
        total_mb,
        max_abs_diff: Some(max_abs_diff),
        quantization_bound: Some(secure.quantization_bound),
        clip_rate: Some(secure.clip_rate),
        calibration: Some(cal),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SketchReport {
    pub spec: SketchSpec,
    pub scale: f64,
    pub distinct_rows: bool,
    pub min_row_load: usize,
    pub max_row_load: usize,
    /// Whether the `γ = 1/2` load band is violated, and the tail bound on that.
    pub band_violated: bool,
    pub band_tail_bound: f64,
    pub row_loads: Vec<usize>,
}

/// Samples a sketch and summarizes its structure.
pub fn sketch_job(job: &JobParams) -> Result<SketchReport> {
    let spec = job.sketch_spec(job.n);
    let dec = sample_sketch(&spec)?;
    let loads = dec.row_loads();
    let piece_loads = dec.piece_row_loads();
    let band_violated = row_loads_violate(&piece_loads[0], spec.n, 0.5);
    let band_tail_bound = row_load_tail_bound(spec.n, spec.m, 0.5);
    Ok(SketchReport {
        spec,
        scale: dec.scale(),
        distinct_rows: dec.has_distinct_rows(),
        min_row_load: loads.iter().copied().min().unwrap_or(0),
        max_row_load: loads.iter().copied().max().unwrap_or(0),
        band_violated,
        band_tail_bound,
        row_loads: loads,
    })
}
