//! Synthetic and real data, error metrics and the sweep harness.

pub mod calibration;
pub mod dataset;
pub mod jobs;
pub mod metrics;
pub mod sweep;
pub mod synthetic;

pub use calibration::{calibrate, CalibrationPolicy, SketchShape};
pub use dataset::{ingest_csv, subsample, Dataset, DatasetConfig, Normalization};
pub use jobs::{frequency_job, lowrank_job, mpc_demo_job, ridge_job, sketch_job, JobParams};
pub use metrics::{metric_phi, metric_psi, psi_from_gram, ridge_objective};
pub use sweep::{sweep, write_sweep, ExperimentResult, Mechanism, Metric, Mu2, NGrid, SweepConfig, SweepOutput, Task};
pub use synthetic::{gen_lowrank, gen_regression, RegressionData, SyntheticKind, SyntheticSpec};
