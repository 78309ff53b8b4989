//! Noise calibrations used by experiments.

use serde::{Deserialize, Serialize};

use crate::analysis::interpolated_sigma;
use crate::error::Result;
use crate::noise::{MechanismParams, NoiseCalibration, NoiseFamily, PrivacyBudget};

/// How per-client noise is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum CalibrationPolicy {
    /// Every released sketch entry carries the noise of a single-entry
    /// mechanism with sensitivity `Δ = factor·η`: Gaussian variance
    /// `2Δ²ln(1.25/δ)/ε²`, and on the Laplace path the sum of `m`
    /// `Laplace(Δ/ε)` draws.
    PerEntry { sensitivity_factor: f64 },
    /// The matrix-mechanism calibrations of the noise module.
    Formal { t_clients: usize },
    /// No noise.
    Zero,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        CalibrationPolicy::PerEntry { sensitivity_factor: 1.0 }
    }
}

/// Variance of the Gaussian mechanism on one value with sensitivity `sens`.
pub fn single_entry_variance(sens: f64, budget: PrivacyBudget) -> f64 {
    2.0 * sens * sens * (1.25 / budget.delta).ln() / (budget.epsilon * budget.epsilon)
}

/// Shape of the sketch a calibration is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchShape {
    /// Clients, including any zero padding.
    pub n: usize,
    pub m: usize,
    pub s: usize,
    /// Width of a client message.
    pub dim: usize,
}

/// Per-client noise for `family` under `policy`. The Gaussian variance is
/// moved along the interpolation path with exponent `p` (`p = 1` keeps it).
/// Infeasible formal calibrations surface as `Error::ThresholdRegime`.
pub fn calibrate(
    policy: CalibrationPolicy,
    family: NoiseFamily,
    budget: PrivacyBudget,
    shape: SketchShape,
    eta: f64,
    p: f64,
) -> Result<NoiseCalibration> {
    budget.validate(family)?;
    let SketchShape { n, m, s, dim } = shape;
    let (nf, mf) = (n as f64, m as f64);
    let cal = match (policy, family) {
        (CalibrationPolicy::Zero, _) => NoiseCalibration::none(eta),
        (CalibrationPolicy::PerEntry { sensitivity_factor }, NoiseFamily::Gaussian) => {
            let sigma2 = single_entry_variance(sensitivity_factor * eta, budget) * mf / nf;
            NoiseCalibration::Gaussian { sigma2: interpolated_sigma(sigma2, n, p)?, eta }
        }
        (CalibrationPolicy::PerEntry { sensitivity_factor }, NoiseFamily::GammaDifference) => {
            NoiseCalibration::GammaDifference {
                gamma_shape: mf / nf,
                gamma_scale: mf.sqrt() * sensitivity_factor * eta / budget.epsilon,
                eta,
            }
        }
        (CalibrationPolicy::Formal { t_clients }, family) => {
            let params = MechanismParams { budget, n, m, d: dim, s, t_clients, eta };
            match params.calibrate(family)? {
                NoiseCalibration::Gaussian { sigma2, eta } => {
                    NoiseCalibration::Gaussian { sigma2: interpolated_sigma(sigma2, n, p)?, eta }
                }
                cal => cal,
            }
        }
    };
    cal.validate()?;
    Ok(cal)
}
