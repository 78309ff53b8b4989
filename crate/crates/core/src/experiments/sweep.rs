//! Grid sweeps over mechanism, noise exponent, privacy budget and data size.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{central_ssp, lowrank_project, max_row_norm, modsulq_from_gram, ridge_from_joint, ridge_solve, NoiseScale};
use crate::error::{Error, Result};
use crate::experiments::calibration::{calibrate, CalibrationPolicy, SketchShape};
use crate::experiments::dataset::{ingest_csv, subsample, DatasetConfig};
use crate::experiments::metrics::{metric_phi, psi_from_gram};
use crate::experiments::synthetic::{gen_lowrank, gen_regression, SyntheticSpec};
use crate::linalg::{gram, top_eigen_sym};
use crate::mechanism::{aggregate_noise, frequency_moment, frequency_pipeline, DataMatrix};
use crate::noise::{frequency_noise, FrequencyParams, NoiseCalibration, NoiseFamily, PrivacyBudget};
use crate::rng::{derive_seed, stream_rng, DEFAULT_MASTER_SEED};
use crate::sketch::{pad_rows, sample_sketch, SketchDecomposition, SketchSpec};
use crate::stats::mean_std;

const DATA_LABEL: u64 = 0x4441_5441;
const RUN_LABEL: u64 = 0x5255_4e53;
const SPARSE_LABEL: u64 = 0x5350_5253;
const DENSE_LABEL: u64 = 0x444e_5345;
const NOISE_LABEL: u64 = 0x4e4f_4953;
const CENTRAL_LABEL: u64 = 0x4345_4e54;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Central,
    LtmGaussian,
    LtmLaplace,
    Local,
}

impl Mechanism {
    pub fn tag(self) -> &'static str {
        match self {
            Mechanism::Central => "central",
            Mechanism::LtmGaussian => "ltm-gaussian",
            Mechanism::LtmLaplace => "ltm-laplace",
            Mechanism::Local => "local",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Psi,
    Phi,
    FreqErr,
    /// The cell's calibration is infeasible; no runs were made.
    ThresholdRegime,
}

impl Metric {
    pub fn tag(self) -> &'static str {
        match self {
            Metric::Psi => "psi",
            Metric::Phi => "phi",
            Metric::FreqErr => "freq_err",
            Metric::ThresholdRegime => "threshold-regime",
        }
    }
}

/// Prior variance of the planted regression coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mu2 {
    /// `μ² = n`.
    N,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    /// Rank-`k` projection on planted spectral-gap data (or a data set).
    Lowrank { d: usize, k: usize },
    /// Ridge regression on planted data (or a data set with a target).
    Regression { d: usize, lambda: f64, mu2: Mu2 },
    /// `F_k` of values drawn uniformly from `[0, Δ]`.
    Frequency { k_power: f64, big_delta: f64 },
}

/// Data sizes `⌊base·ratio^i⌉` for `i` in `first..=last`, or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<usize>),
    Geometric { base: f64, ratio: f64, first: u32, last: u32 },
}

impl Default for NGrid {
    fn default() -> Self {
        NGrid::Geometric { base: 1000.0, ratio: 10f64.sqrt(), first: 0, last: 6 }
    }
}

impl NGrid {
    pub fn values(&self) -> Vec<usize> {
        let mut v = match self {
            NGrid::List(v) => v.clone(),
            NGrid::Geometric { base, ratio, first, last } => {
                (*first..=*last).map(|i| (base * ratio.powi(i as i32)).round() as usize).collect()
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub task: Task,
    pub mechanisms: Vec<Mechanism>,
    /// Noise exponents for `ltm-gaussian`; `local` is always `p = 0`.
    #[serde(default = "default_p")]
    pub p_values: Vec<f64>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub n_grid: NGrid,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Sketch rows.
    pub m: usize,
    /// Nonzeros per column of the Gaussian-path sketch. The Laplace path
    /// always uses the dense sketch.
    #[serde(default = "one")]
    pub s: usize,
    #[serde(default)]
    pub calibration: CalibrationPolicy,
    #[serde(default)]
    pub central_noise: NoiseScale,
    /// Real data set to subsample instead of synthetic data.
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    /// Worker threads; the global pool when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_p() -> Vec<f64> {
    vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.0]
}

fn default_delta() -> f64 {
    1e-6
}

fn default_runs() -> usize {
    20
}

fn default_seed() -> u64 {
    DEFAULT_MASTER_SEED
}

fn one() -> usize {
    1
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.mechanisms.is_empty() || self.epsilons.is_empty() {
            return bad("sweep needs at least one mechanism and one epsilon".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) || !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("invalid budget: epsilons {:?}, delta {}", self.epsilons, self.delta));
        }
        if self.p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("p values {:?} must lie in [0, 1]", self.p_values));
        }
        if self.m == 0 || self.s == 0 || self.s > self.m {
            return bad(format!("need 1 <= s <= m, got s={} m={}", self.s, self.m));
        }
        let grid = self.n_grid.values();
        if grid.first().is_none_or(|&n| n < self.m) {
            return bad(format!("every n must be at least m={}", self.m));
        }
        match &self.task {
            Task::Lowrank { d, k } if *k == 0 || k > d || *k > self.m => bad(format!("need 1 <= k <= min(d, m), got k={k}")),
            Task::Regression { lambda, .. } if !(*lambda > 0.0) => bad(format!("lambda={lambda} must be positive")),
            Task::Frequency { k_power, big_delta } if !(*k_power >= 1.0 && *big_delta > 0.0) => {
                bad("frequency task needs k >= 1 and Delta > 0".into())
            }
            Task::Frequency { .. } if self.mechanisms.iter().any(|m| matches!(m, Mechanism::Central | Mechanism::Local)) => {
                bad("the frequency task supports ltm-gaussian and ltm-laplace only".into())
            }
            _ => Ok(()),
        }
    }

    /// Every `(mechanism, p, epsilon)` combination, in canonical order.
    fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &mech in &self.mechanisms {
            for &eps in &self.epsilons {
                match mech {
                    Mechanism::LtmGaussian if !matches!(self.task, Task::Frequency { .. }) => {
                        out.extend(self.p_values.iter().map(|&p| Variant { mech, p: Some(p), eps }))
                    }
                    Mechanism::Central => out.push(Variant { mech, p: None, eps }),
                    Mechanism::Local => out.push(Variant { mech, p: Some(0.0), eps }),
                    _ => out.push(Variant { mech, p: Some(1.0), eps }),
                }
            }
        }
        out.sort_by(|a, b| a.cmp_key(b));
        out.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
        out
    }

    fn metric(&self) -> Metric {
        match self.task {
            Task::Lowrank { .. } => Metric::Psi,
            Task::Regression { .. } => Metric::Phi,
            Task::Frequency { .. } => Metric::FreqErr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Variant {
    mech: Mechanism,
    p: Option<f64>,
    eps: f64,
}

impl Variant {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.mech
            .cmp(&other.mech)
            .then_with(|| cmp_opt(other.p, self.p))
            .then_with(|| self.eps.total_cmp(&other.eps))
    }

    fn label(&self) -> [u64; 4] {
        [NOISE_LABEL, self.mech as u64, self.p.map_or(u64::MAX, f64::to_bits), self.eps.to_bits()]
    }
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

/// One row of a sweep result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub mechanism: Mechanism,
    pub p: Option<f64>,
    pub epsilon: f64,
    pub n: usize,
    pub metric: Metric,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub runs: usize,
    pub seed: u64,
}

/// Column order of the result CSV.
pub const CSV_HEADER: [&str; 9] = ["mechanism", "p", "epsilon", "n", "metric", "mean", "std", "runs", "seed"];

/// Sorts rows canonically: mechanism, descending `p`, epsilon, `n`, metric.
pub fn sort_results(rows: &mut [ExperimentResult]) {
    rows.sort_by(|a, b| {
        a.mechanism
            .cmp(&b.mechanism)
            .then_with(|| cmp_opt(b.p, a.p))
            .then_with(|| a.epsilon.total_cmp(&b.epsilon))
            .then_with(|| a.n.cmp(&b.n))
            .then_with(|| a.metric.cmp(&b.metric))
    });
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ExperimentResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.mechanism.tag().to_string(),
            opt(r.p),
            r.epsilon.to_string(),
            r.n.to_string(),
            r.metric.tag().to_string(),
            opt(r.mean),
            opt(r.std),
            r.runs.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Facts about the data behind each `n`, kept for the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<ExperimentResult>,
    pub data: Vec<DataSummary>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    config: &'a SweepConfig,
    data: &'a [DataSummary],
    rows: usize,
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_sweep(dir: &Path, cfg: &SweepConfig, out: &SweepOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results_csv(std::fs::File::create(dir.join("results.csv"))?, &out.rows)?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        data: &out.data,
        rows: out.rows.len(),
    };
    let mut f = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Runs every cell of the grid. Output is a pure function of the config.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| run_sweep(cfg)),
        None => run_sweep(cfg),
    }
}

fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    let source = match &cfg.dataset {
        Some(ds) => Some(ingest_csv(ds)?.data),
        None => None,
    };
    let variants = cfg.variants();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for n in cfg.n_grid.values() {
        let data_seed = derive_seed(cfg.seed, &[DATA_LABEL, n as u64]);
        let (cell_rows, summary) = match &cfg.task {
            Task::Lowrank { d, k } => {
                let data = match &source {
                    Some(src) => subsample(src, n, data_seed)?,
                    None => gen_lowrank(&SyntheticSpec::lowrank(n, *d, *k, data_seed))?,
                };
                let summary = DataSummary { n, d: data.d(), eta: data.eta() };
                (run_lowrank(cfg, &variants, &data, *k)?, summary)
            }
            Task::Regression { d, lambda, mu2 } => {
                let data = match &source {
                    Some(src) => subsample(src, n, data_seed)?,
                    None => {
                        let mu2 = match mu2 {
                            Mu2::N => n as f64,
                            Mu2::Fixed(v) => *v,
                        };
                        gen_regression(&SyntheticSpec::regression(n, *d, mu2, data_seed))?.data
                    }
                };
                if data.target().is_none() {
                    return Err(Error::Config("regression needs a target column".into()));
                }
                let summary = DataSummary { n, d: data.d(), eta: data.eta() };
                (run_regression(cfg, &variants, &data, *lambda)?, summary)
            }
            Task::Frequency { k_power, big_delta } => {
                let summary = DataSummary { n, d: 1, eta: big_delta.powf(*k_power) };
                (run_frequency(cfg, &variants, n, *k_power, *big_delta, data_seed)?, summary)
            }
        };
        rows.extend(cell_rows);
        summaries.push(summary);
    }
    sort_results(&mut rows);
    Ok(SweepOutput { rows, data: summaries })
}

/// Per-client noise of one variant, or `None` for the central baseline.
enum CellNoise {
    Central,
    Sketch { cal: NoiseCalibration, dense: bool },
    Infeasible,
}

/// Resolves the noise of each variant at size `n` with message width `dim`.
fn calibrations(cfg: &SweepConfig, variants: &[Variant], n: usize, dim: usize, eta: f64) -> Result<Vec<CellNoise>> {
    let m = cfg.m;
    variants
        .iter()
        .map(|v| {
            let family = match v.mech {
                Mechanism::Central => return Ok(CellNoise::Central),
                Mechanism::LtmLaplace => NoiseFamily::GammaDifference,
                _ => NoiseFamily::Gaussian,
            };
            let dense = family == NoiseFamily::GammaDifference;
            let shape = if dense {
                SketchShape { n: n.div_ceil(m) * m, m, s: m, dim }
            } else {
                SketchShape { n, m, s: cfg.s, dim }
            };
            let budget = PrivacyBudget::new(v.eps, cfg.delta);
            match calibrate(cfg.calibration, family, budget, shape, eta, v.p.unwrap_or(1.0)) {
                Ok(cal) => Ok(CellNoise::Sketch { cal, dense }),
                Err(Error::ThresholdRegime(_)) => Ok(CellNoise::Infeasible),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Sketches of one run: the sparse Gaussian-path sketch and, when a Laplace
/// variant is present, the dense one, each applied to the run's data.
struct RunSketches {
    sparse: Option<(SketchDecomposition, DMatrix<f64>)>,
    dense: Option<(SketchDecomposition, DMatrix<f64>)>,
}

fn sketch_run(cfg: &SweepConfig, joint: &DMatrix<f64>, noises: &[CellNoise], run_seed: u64) -> Result<RunSketches> {
    let n = joint.nrows();
    let need = |dense: bool| noises.iter().any(|c| matches!(c, CellNoise::Sketch { dense: d, .. } if *d == dense));
    let sparse = if need(false) {
        let dec = sample_sketch(&SketchSpec::sparse(n, cfg.m, cfg.s, derive_seed(run_seed, &[SPARSE_LABEL])))?;
        let y = dec.apply_uniform(joint)?;
        Some((dec, y))
    } else {
        None
    };
    let dense = if need(true) {
        let padded = if n.is_multiple_of(cfg.m) { Cow::Borrowed(joint) } else { Cow::Owned(pad_rows(joint, cfg.m)) };
        let dec = sample_sketch(&SketchSpec::dense(padded.nrows(), cfg.m, derive_seed(run_seed, &[DENSE_LABEL])))?;
        let y = dec.apply_uniform(&padded)?;
        Some((dec, y))
    } else {
        None
    };
    Ok(RunSketches { sparse, dense })
}

/// Released sketch of one variant in one run.
fn released(sk: &RunSketches, cell: &CellNoise, v: &Variant, run_seed: u64) -> Option<DMatrix<f64>> {
    let CellNoise::Sketch { cal, dense } = cell else { return None };
    let (dec, y) = if *dense { sk.dense.as_ref()? } else { sk.sparse.as_ref()? };
    Some(y + aggregate_noise(dec, cal, y.ncols(), derive_seed(run_seed, &v.label())))
}

/// Collects per-run values into result rows.
fn assemble(cfg: &SweepConfig, variants: &[Variant], noises: &[CellNoise], n: usize, per_run: Vec<Vec<f64>>) -> Vec<ExperimentResult> {
    variants
        .iter()
        .zip(noises)
        .enumerate()
        .map(|(i, (v, cell))| {
            let (metric, mean, std) = if matches!(cell, CellNoise::Infeasible) {
                (Metric::ThresholdRegime, None, None)
            } else {
                let values: Vec<f64> = per_run.iter().map(|r| r[i]).collect();
                let (mean, std) = mean_std(&values);
                (cfg.metric(), Some(mean), Some(std))
            };
            ExperimentResult { mechanism: v.mech, p: v.p, epsilon: v.eps, n, metric, mean, std, runs: cfg.runs, seed: cfg.seed }
        })
        .collect()
}

fn run_seeds(cfg: &SweepConfig, n: usize) -> Vec<u64> {
    (0..cfg.runs).map(|r| derive_seed(cfg.seed, &[RUN_LABEL, n as u64, r as u64])).collect()
}

fn run_lowrank(cfg: &SweepConfig, variants: &[Variant], data: &DataMatrix, k: usize) -> Result<Vec<ExperimentResult>> {
    let n = data.n();
    let a = data.a();
    let g = gram(a);
    let (_, x_opt) = top_eigen_sym(&g, k);
    let row_norm = max_row_norm(a);
    let noises = calibrations(cfg, variants, n, data.d(), data.eta())?;
    let per_run = run_seeds(cfg, n)
        .into_par_iter()
        .map(|run_seed| {
            let sk = sketch_run(cfg, a, &noises, run_seed)?;
            variants
                .iter()
                .zip(&noises)
                .map(|(v, cell)| {
                    let basis = match cell {
                        CellNoise::Infeasible => return Ok(f64::NAN),
                        CellNoise::Central => {
                            let mut rng = stream_rng(derive_seed(run_seed, &[CENTRAL_LABEL, v.eps.to_bits()]), 0);
                            let budget = PrivacyBudget::new(v.eps, cfg.delta);
                            modsulq_from_gram(&g, n, row_norm, k, budget, cfg.central_noise, &mut rng)?.basis
                        }
                        _ => {
                            let y = released(&sk, cell, v, run_seed).expect("sketch sampled for every noisy cell");
                            lowrank_project(&y, k)?.basis
                        }
                    };
                    psi_from_gram(&g, n, &basis, &x_opt)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, variants, &noises, n, per_run))
}

fn run_regression(cfg: &SweepConfig, variants: &[Variant], data: &DataMatrix, lambda: f64) -> Result<Vec<ExperimentResult>> {
    let n = data.n();
    let (a, b) = (data.a(), data.target().expect("checked by caller"));
    let x_opt = ridge_solve(a, b, lambda)?.x;
    let joint = data.joint();
    let noises = calibrations(cfg, variants, n, data.message_dim(), data.eta())?;
    let per_run = run_seeds(cfg, n)
        .into_par_iter()
        .map(|run_seed| {
            let sk = sketch_run(cfg, &joint, &noises, run_seed)?;
            variants
                .iter()
                .zip(&noises)
                .map(|(v, cell)| {
                    let x = match cell {
                        CellNoise::Infeasible => return Ok(f64::NAN),
                        CellNoise::Central => {
                            let mut rng = stream_rng(derive_seed(run_seed, &[CENTRAL_LABEL, v.eps.to_bits()]), 0);
                            let budget = PrivacyBudget::new(v.eps, cfg.delta);
                            central_ssp(a, b, lambda, budget, cfg.central_noise, &mut rng)?.solution.x
                        }
                        _ => {
                            let y = released(&sk, cell, v, run_seed).expect("sketch sampled for every noisy cell");
                            ridge_from_joint(&y, lambda)?.x
                        }
                    };
                    metric_phi(a, b, &x, &x_opt, lambda)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, variants, &noises, n, per_run))
}

fn run_frequency(cfg: &SweepConfig, variants: &[Variant], n: usize, k_power: f64, big_delta: f64, data_seed: u64) -> Result<Vec<ExperimentResult>> {
    let mut rng = stream_rng(data_seed, 0);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=big_delta)).collect();
    let exact = frequency_moment(&values, k_power);
    let params: Vec<FrequencyParams> = variants
        .iter()
        .map(|v| FrequencyParams {
            family: if v.mech == Mechanism::LtmLaplace { NoiseFamily::GammaDifference } else { NoiseFamily::Gaussian },
            big_delta,
            k_power,
            n,
            budget: PrivacyBudget::new(v.eps, cfg.delta),
            sensitivity_exponent: None,
        })
        .collect();
    let cals = params.iter().map(frequency_noise).collect::<Result<Vec<_>>>()?;
    let noises: Vec<CellNoise> = cals.iter().map(|&cal| CellNoise::Sketch { cal, dense: false }).collect();
    let per_run = run_seeds(cfg, n)
        .into_par_iter()
        .map(|run_seed| {
            variants
                .iter()
                .zip(params.iter().zip(&cals))
                .map(|(v, (p, cal))| Ok(frequency_pipeline(&values, p, cal, derive_seed(run_seed, &v.label()))? - exact))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, variants, &noises, n, per_run))
}

/// Groups rows by `(mechanism, p, epsilon)` into `n`-ordered curves of means.
pub fn curves(rows: &[ExperimentResult]) -> BTreeMap<String, Vec<(usize, f64)>> {
    let mut out: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(mean) = r.mean {
            let key = format!("{}|{}|{}", r.mechanism.tag(), r.p.map(|p| p.to_string()).unwrap_or_default(), r.epsilon);
            out.entry(key).or_default().push((r.n, mean));
        }
    }
    for v in out.values_mut() {
        v.sort_by_key(|&(n, _)| n);
    }
    out
}
