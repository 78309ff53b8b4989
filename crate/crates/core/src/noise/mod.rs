//! Infinitely divisible client noise and its calibration.
//!
//! Each client adds a small independent noise sample to every entry of its
//! message. After sketching, a sketch entry holds the sum of the noise of the
//! clients hashed to it, and the calibrations below are chosen so that this sum
//! is a Gaussian or Laplace variable of the size the privacy budget requires.

pub mod gamma;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use gamma::{sample_gamma, sample_gamma_difference};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        PrivacyBudget { epsilon, delta }
    }

    pub fn validate(&self, family: NoiseFamily) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon={} must be positive", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::param(format!("delta={} outside [0, 1)", self.delta)));
        }
        if self.delta == 0.0 && family == NoiseFamily::Gaussian {
            return Err(Error::param("delta = 0 requires the gamma-difference family"));
        }
        Ok(())
    }
}

/// Corrupt clients `t′` and corrupt servers `t`. The server count is
/// informational: additive sharing tolerates all but one server.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreatModel {
    pub t_clients: usize,
    #[serde(default)]
    pub t_servers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    GammaDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseCalibration {
    Gaussian { sigma2: f64, eta: f64 },
    GammaDifference { gamma_shape: f64, gamma_scale: f64, eta: f64 },
}

impl NoiseCalibration {
    /// No noise at all. Useful for exactness checks.
    pub fn none(eta: f64) -> Self {
        NoiseCalibration::Gaussian { sigma2: 0.0, eta }
    }

    pub fn family(&self) -> NoiseFamily {
        match self {
            NoiseCalibration::Gaussian { .. } => NoiseFamily::Gaussian,
            NoiseCalibration::GammaDifference { .. } => NoiseFamily::GammaDifference,
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            NoiseCalibration::Gaussian { eta, .. } | NoiseCalibration::GammaDifference { eta, .. } => eta,
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        match self {
            NoiseCalibration::Gaussian { sigma2, .. } => NoiseCalibration::Gaussian { sigma2, eta },
            NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, .. } => {
                NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, eta }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, NoiseCalibration::Gaussian { sigma2, .. } if sigma2 == 0.0)
    }

    /// Variance of one client sample.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseCalibration::Gaussian { sigma2, .. } => sigma2,
            NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, .. } => {
                2.0 * gamma_shape * gamma_scale * gamma_scale
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseCalibration::Gaussian { sigma2, eta } => sigma2 >= 0.0 && sigma2.is_finite() && eta > 0.0,
            NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, eta } => {
                gamma_shape > 0.0 && gamma_scale > 0.0 && gamma_scale.is_finite() && eta > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid noise calibration {self:?}")))
        }
    }

    /// One client sample.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseCalibration::Gaussian { sigma2, .. } => {
                if sigma2 == 0.0 {
                    0.0
                } else {
                    sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
                }
            }
            NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, .. } => {
                sample_gamma_difference(gamma_shape, gamma_scale, rng)
            }
        }
    }

    /// One draw distributed as the sum of `count` independent client samples.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let c = count as f64;
        match *self {
            NoiseCalibration::Gaussian { sigma2, .. } => {
                if sigma2 == 0.0 {
                    0.0
                } else {
                    (c * sigma2).sqrt() * rng.sample::<f64, _>(StandardNormal)
                }
            }
            NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, .. } => {
                sample_gamma_difference(c * gamma_shape, gamma_scale, rng)
            }
        }
    }
}

/// `count` i.i.d. client samples.
pub fn sample_client_noise<R: Rng + ?Sized>(cal: &NoiseCalibration, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| cal.sample(rng)).collect()
}

/// Public parameters that decide whether the sparse randomizer must output zeros.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdContext {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub s: usize,
    pub delta: f64,
    pub t_clients: usize,
}

impl ThresholdContext {
    /// `8m·ln(dm/δ) + t′`: below this many clients the randomizer outputs zeros.
    pub fn client_threshold(&self) -> f64 {
        8.0 * self.m as f64 * (self.d as f64 * self.m as f64 / self.delta).ln() + self.t_clients as f64
    }

    pub fn threshold_fires(&self) -> bool {
        (self.n as f64) < self.client_threshold()
    }

    /// The Gaussian calibration needs `n > s + t′` and
    /// `δ/d > m·exp(−(n−s−t′)/(8m))`.
    pub fn guard_fires(&self) -> bool {
        if self.n <= self.s + self.t_clients {
            return true;
        }
        guard_gap(self.n, self.m, self.d, self.s, self.t_clients, self.delta) <= 0.0
    }

    /// Both checks are applied; either one forces the zero branch.
    pub fn zero_branch(&self) -> bool {
        self.threshold_fires() || self.guard_fires()
    }
}

fn guard_gap(n: usize, m: usize, d: usize, s: usize, t: usize, delta: f64) -> f64 {
    let eff = (n - s - t) as f64;
    let mf = m as f64;
    delta / d as f64 - mf * (-eff / (8.0 * mf)).exp()
}

/// Per-entry Gaussian variance for the sparse randomizer:
/// `σ² = 4s³η²·ln(1.25s/(δ/d − m·e^{−(n−s−t′)/(8m)}))·m·d² / (ε²(n−s−t′))`.
pub fn gaussian_sigma2(
    budget: PrivacyBudget,
    n: usize,
    m: usize,
    d: usize,
    s: usize,
    t_clients: usize,
    eta: f64,
) -> Result<f64> {
    budget.validate(NoiseFamily::Gaussian)?;
    if m == 0 || d == 0 || s == 0 || !(eta > 0.0) {
        return Err(Error::param("m, d, s and eta must be positive"));
    }
    if n <= s + t_clients {
        return Err(Error::ThresholdRegime(format!("n={n} does not exceed s + t'={}", s + t_clients)));
    }
    let gap = guard_gap(n, m, d, s, t_clients, budget.delta);
    if gap <= 0.0 {
        return Err(Error::ThresholdRegime(format!(
            "delta/d={} does not exceed m*exp(-(n-s-t')/(8m))={}",
            budget.delta / d as f64,
            budget.delta / d as f64 - gap
        )));
    }
    let (sf, mf, df) = (s as f64, m as f64, d as f64);
    let eff = (n - s - t_clients) as f64;
    let log_term = (1.25 * sf / gap).ln();
    Ok(4.0 * sf.powi(3) * eta * eta * log_term * mf * df * df
        / (budget.epsilon * budget.epsilon * eff))
}

/// Gamma-difference parameters for the dense randomizer:
/// shape `1/(n/m − t′)` and scale `b = 2ηm²d/ε`.
pub fn gamma_params(n: usize, m: usize, d: usize, t_clients: usize, eta: f64, epsilon: f64) -> Result<(f64, f64)> {
    if m == 0 || d == 0 || !(eta > 0.0) || !(epsilon > 0.0) {
        return Err(Error::param("m, d, eta and epsilon must be positive"));
    }
    let denom = n as f64 / m as f64 - t_clients as f64;
    if denom <= 0.0 {
        return Err(Error::param(format!("n/m - t' = {denom} is not positive")));
    }
    let mf = m as f64;
    Ok((1.0 / denom, 2.0 * eta * mf * mf * d as f64 / epsilon))
}

/// Everything that determines a matrix-mechanism calibration. Serialized next
/// to the resulting calibration as an audit record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    pub budget: PrivacyBudget,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub s: usize,
    pub t_clients: usize,
    pub eta: f64,
}

impl MechanismParams {
    pub fn threshold(&self) -> ThresholdContext {
        ThresholdContext {
            n: self.n,
            m: self.m,
            d: self.d,
            s: self.s,
            delta: self.budget.delta,
            t_clients: self.t_clients,
        }
    }

    pub fn gaussian(&self) -> Result<NoiseCalibration> {
        let th = self.threshold();
        if th.threshold_fires() {
            return Err(Error::ThresholdRegime(format!(
                "n={} is below the randomizer threshold {:.1}",
                self.n,
                th.client_threshold()
            )));
        }
        let sigma2 = gaussian_sigma2(self.budget, self.n, self.m, self.d, self.s, self.t_clients, self.eta)?;
        Ok(NoiseCalibration::Gaussian { sigma2, eta: self.eta })
    }

    pub fn gamma(&self) -> Result<NoiseCalibration> {
        let (gamma_shape, gamma_scale) =
            gamma_params(self.n, self.m, self.d, self.t_clients, self.eta, self.budget.epsilon)?;
        Ok(NoiseCalibration::GammaDifference { gamma_shape, gamma_scale, eta: self.eta })
    }

    pub fn calibrate(&self, family: NoiseFamily) -> Result<NoiseCalibration> {
        match family {
            NoiseFamily::Gaussian => self.gaussian(),
            NoiseFamily::GammaDifference => self.gamma(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub params: serde_json::Value,
    pub calibration: NoiseCalibration,
}

impl CalibrationRecord {
    pub fn new<P: Serialize>(params: &P, calibration: NoiseCalibration) -> Result<Self> {
        Ok(CalibrationRecord { params: serde_json::to_value(params)?, calibration })
    }
}

/// Parameters of the frequency-moment mechanism: client values lie in
/// `[−Δ, Δ]` and the target is `F_k = Σ |x_i|^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyParams {
    pub family: NoiseFamily,
    pub big_delta: f64,
    pub k_power: f64,
    pub n: usize,
    pub budget: PrivacyBudget,
    /// Exponent applied to `Δ` in the noise scale. Defaults to `k_power`.
    #[serde(default)]
    pub sensitivity_exponent: Option<f64>,
}

impl FrequencyParams {
    pub fn exponent(&self) -> f64 {
        self.sensitivity_exponent.unwrap_or(self.k_power)
    }
}

/// Gaussian: `σ² = 2Δ^k·ln(1.25/δ)/(nε²)`. Gamma-difference: shape `1/n`,
/// scale `2Δ^k/ε`, so the aggregate over `n` clients is `Laplace(0, 2Δ^k/ε)`.
pub fn frequency_noise(p: &FrequencyParams) -> Result<NoiseCalibration> {
    p.budget.validate(p.family)?;
    if !(p.big_delta > 0.0) || !(p.k_power >= 1.0) || p.n == 0 {
        return Err(Error::param("frequency noise needs Delta > 0, k >= 1 and n >= 1"));
    }
    let sens = p.big_delta.powf(p.exponent());
    let eta = p.big_delta.powf(p.k_power);
    let eps = p.budget.epsilon;
    Ok(match p.family {
        NoiseFamily::Gaussian => NoiseCalibration::Gaussian {
            sigma2: 2.0 * sens * (1.25 / p.budget.delta).ln() / (p.n as f64 * eps * eps),
            eta,
        },
        NoiseFamily::GammaDifference => NoiseCalibration::GammaDifference {
            gamma_shape: 1.0 / p.n as f64,
            gamma_scale: 2.0 * sens / eps,
            eta,
        },
    })
}
