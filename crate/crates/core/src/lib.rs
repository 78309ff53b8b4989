//! Distributed differential privacy through secure linear sketching.
//!
//! Clients add a small share of infinitely divisible noise to their rows, a
//! group of simulated servers applies a public sparse or dense sketch to the
//! secret-shared messages, and an analyst solves low-rank approximation or
//! ridge regression on the released sketch.
//!
//! - [`sketch`]: OSNAP sketches, their piece decomposition and streaming application.
//! - [`noise`]: Gaussian and gamma-difference client noise with calibrations and guards.
//! - [`mechanism`]: client randomizers and the plaintext pipeline.
//! - [`mpc`]: additive sharing over `Z_2^64`, fixed-point codec, wire format, traffic accounting.
//! - [`analysis`]: rank-k projection, ridge solves, central baselines.
//! - [`experiments`]: synthetic and CSV data, metrics, single jobs and seeded sweeps.
//! - [`cli`]: the `ltm` command-line driver.
//!
//! Runnable walkthroughs live in `examples/`.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mechanism;
pub mod mpc;
pub mod noise;
pub mod rng;
pub mod sketch;
pub mod stats;

pub use error::{Error, Result};
