//! Command-line driver.
//!
//! Every subcommand resolves an effective configuration (flags, then the
//! `--config` JSON file, then defaults), calls one library entry point and
//! writes its report plus a manifest of the effective configuration.
//!
//! Exit codes: `0` success, `2` configuration error, `3` infeasible
//! calibration (threshold regime), `4` data error, `5` internal error. Errors
//! print a single line `error[<kind>]: <reason>` on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::jobs::{frequency_job, lowrank_job, mpc_demo_job, ridge_job, sketch_job, JobParams};
use crate::experiments::sweep::{sweep, write_sweep, NGrid, SweepConfig};
use crate::experiments::CalibrationPolicy;
use crate::noise::NoiseFamily;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ThresholdRegime(_) => EXIT_THRESHOLD,
        Error::Data(_) | Error::InputBound(_) | Error::Io(_) | Error::Csv(_) | Error::Wire(_) => EXIT_DATA,
        Error::Internal(_) => EXIT_INTERNAL,
        Error::Parameter(_)
        | Error::Structure(_)
        | Error::Shape(_)
        | Error::Infeasible(_)
        | Error::Range(_)
        | Error::Config(_)
        | Error::Json(_) => EXIT_CONFIG,
    }
}

#[derive(Parser, Debug)]
#[command(name = "ltm", version, about = "Private linear sketches: demos and experiment sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Sample a sketch and summarize its row loads.
    Sketch,
    /// Rank-k projection from a private sketch of spectral-gap data.
    Lowrank,
    /// Ridge regression from a private sketch of planted regression data.
    Ridge,
    /// Private frequency moment of bounded client values.
    Frequency,
    /// Secret-shared pipeline with communication accounting.
    MpcDemo,
    /// Experiment grid from the `sweep` section of the config.
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    GammaDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    /// Matrix-mechanism calibration.
    Formal,
    /// Single-entry calibration of every released value.
    PerEntry,
    /// No noise.
    None,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub s: Option<usize>,
    #[arg(long, global = true)]
    pub servers: Option<usize>,
    #[arg(long = "frac-bits", global = true)]
    pub frac_bits: Option<u8>,
    #[arg(long = "t-clients", global = true)]
    pub t_clients: Option<usize>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file; see the README for the schema.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for reports and manifests.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, global = true, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Use the dense sketch.
    #[arg(long, global = true)]
    pub dense: bool,
    /// Only compute the communication report (`mpc-demo`).
    #[arg(long = "report-only", global = true)]
    pub report_only: bool,
}

/// Contents of a `--config` file: job parameters at the top level and an
/// optional `sweep` section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub job: JobParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{}: {e}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(&e))?;
        // flatten defeats deny_unknown_fields, so split the sweep table off by hand
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        let sweep = match value.as_object_mut() {
            Some(obj) => obj.remove("sweep"),
            None => return Err(bad(&"config must be a JSON object")),
        };
        let job = serde_json::from_value(value).map_err(|e| bad(&e))?;
        let sweep = match sweep {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(serde_json::from_value(v).map_err(|e| bad(&e))?),
        };
        Ok(Self { job, sweep })
    }

    /// Overlays command-line flags.
    pub fn apply(&mut self, f: &Flags) -> Result<()> {
        let j = &mut self.job;
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { j.$field = v; } )* };
        }
        set!(epsilon, delta, n, d, k, m, s, servers, frac_bits, lambda, p, seed);
        if f.eta.is_some() {
            j.eta = f.eta;
        }
        if f.dense {
            j.dense = true;
        }
        if f.report_only {
            j.report_only = true;
        }
        if let Some(fam) = f.family {
            j.family = match fam {
                FamilyArg::Gaussian => NoiseFamily::Gaussian,
                FamilyArg::GammaDifference => NoiseFamily::GammaDifference,
            };
        }
        let t_clients = f.t_clients.or(match j.calibration {
            CalibrationPolicy::Formal { t_clients } => Some(t_clients),
            _ => None,
        });
        if let Some(noise) = f.noise {
            j.calibration = match noise {
                NoiseArg::Formal => CalibrationPolicy::Formal { t_clients: t_clients.unwrap_or(0) },
                NoiseArg::PerEntry => CalibrationPolicy::default(),
                NoiseArg::None => CalibrationPolicy::Zero,
            };
        } else if let (Some(t), CalibrationPolicy::Formal { .. }) = (f.t_clients, j.calibration) {
            j.calibration = CalibrationPolicy::Formal { t_clients: t };
        }
        if let Some(sw) = self.sweep.as_mut() {
            if let Some(v) = f.runs {
                sw.runs = v;
            }
            if let Some(v) = f.seed {
                sw.seed = v;
            }
            if let Some(v) = f.m {
                sw.m = v;
            }
            if let Some(v) = f.s {
                sw.s = v;
            }
            if let Some(v) = f.delta {
                sw.delta = v;
            }
            if let Some(v) = f.epsilon {
                sw.epsilons = vec![v];
            }
            if let Some(v) = f.p {
                sw.p_values = vec![v];
            }
            if let Some(v) = f.n {
                sw.n_grid = NGrid::List(vec![v]);
            }
            if f.noise.is_some() || f.t_clients.is_some() {
                sw.calibration = self.job.calibration;
            }
        }
        Ok(())
    }
}

/// Parses arguments and runs the command, writing the report to `stdout`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let reason = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {reason}", e.kind());
            exit_code(&e)
        }
    }
}

/// Effective configuration for `cli`.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.flags)?;
    Ok(cfg)
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = resolve(cli)?;
    let out = cli.flags.out.as_deref();
    let job = &cfg.job;
    let report = match cli.command {
        Command::Sketch => serde_json::to_value(sketch_job(job)?)?,
        Command::Lowrank => serde_json::to_value(lowrank_job(job)?)?,
        Command::Ridge => serde_json::to_value(ridge_job(job)?)?,
        Command::Frequency => serde_json::to_value(frequency_job(job)?)?,
        Command::MpcDemo => serde_json::to_value(mpc_demo_job(job)?)?,
        Command::Sweep => {
            let sw = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep needs a config with a `sweep` section".into()))?;
            let result = sweep(sw)?;
            if let Some(dir) = out {
                write_sweep(dir, sw, &result)?;
            }
            let mut buf = Vec::new();
            crate::experiments::sweep::write_results_csv(&mut buf, &result.rows)?;
            stdout.write_all(&buf)?;
            return Ok(());
        }
    };
    writeln!(stdout, "{}", serde_json::to_string(&report)?)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let name = format!("{}.json", command_name(cli.command));
        std::fs::write(dir.join(name), serde_json::to_string_pretty(&report)? + "\n")?;
        let manifest = serde_json::json!({
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command_name(cli.command),
            "config": cfg,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok(())
}

pub fn command_name(c: Command) -> &'static str {
    match c {
        Command::Sketch => "sketch",
        Command::Lowrank => "lowrank",
        Command::Ridge => "ridge",
        Command::Frequency => "frequency",
        Command::MpcDemo => "mpc-demo",
        Command::Sweep => "sweep",
    }
}
