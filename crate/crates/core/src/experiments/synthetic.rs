//! Synthetic data sets: a planted spectral gap and planted linear regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{canonical_order, gram};
use crate::mechanism::DataMatrix;
use crate::rng::{derive_seed, stream_rng};

const LOWRANK_LABEL: u64 = 0x4c52_4e4b;
const REGRESSION_LABEL: u64 = 0x5245_4752;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    LowrankGap,
    Regression,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub k: usize,
    /// Prior variance of the planted regression coefficients.
    #[serde(default = "default_mu2")]
    pub mu2: f64,
    pub seed: u64,
}

fn default_mu2() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn lowrank(n: usize, d: usize, k: usize, seed: u64) -> Self {
        SyntheticSpec { kind: SyntheticKind::LowrankGap, n, d, k, mu2: 1.0, seed }
    }

    pub fn regression(n: usize, d: usize, mu2: f64, seed: u64) -> Self {
        SyntheticSpec { kind: SyntheticKind::Regression, n, d, k: 0, mu2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::param("synthetic data needs n, d > 0"));
        }
        match self.kind {
            SyntheticKind::LowrankGap if self.k == 0 || self.k > self.d || self.d > self.n => {
                Err(Error::param(format!("need 1 <= k <= d <= n, got k={} d={} n={}", self.k, self.d, self.n)))
            }
            SyntheticKind::Regression if !(self.mu2 > 0.0 && self.mu2.is_finite()) => {
                Err(Error::param(format!("mu2={} must be positive", self.mu2)))
            }
            _ => Ok(()),
        }
    }
}

/// Planted regression instance.
#[derive(Clone, Debug)]
pub struct RegressionData {
    pub data: DataMatrix,
    pub planted: DVector<f64>,
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// The target spectrum: `k` values `√(n/k)`, then `1/n`.
pub fn gap_spectrum(n: usize, d: usize, k: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..d).map(|i| if i < k { (nf / k as f64).sqrt() } else { 1.0 / nf }).collect()
}

/// `A = U′ΣV′` where `G = U′ S V′` is the SVD of an i.i.d. standard normal
/// `n×d` matrix. Computed as `A = G·V S⁻¹ Σ Vᵀ` from the eigendecomposition of
/// `GᵀG`. `η` is the largest entry magnitude.
pub fn gen_lowrank(spec: &SyntheticSpec) -> Result<DataMatrix> {
    spec.validate()?;
    if spec.kind != SyntheticKind::LowrankGap {
        return Err(Error::param("gen_lowrank needs a lowrank-gap spec"));
    }
    let (n, d) = (spec.n, spec.d);
    let mut rng = stream_rng(derive_seed(spec.seed, &[LOWRANK_LABEL, n as u64, d as u64]), 0);
    let g = gaussian_matrix(n, d, &mut rng);
    let eig = gram(&g).symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let (vals, v) = canonical_order(&values, &eig.eigenvectors, 0.0);
    if vals[d - 1] <= 0.0 {
        return Err(Error::Internal("Gaussian matrix is rank deficient".into()));
    }
    let target = gap_spectrum(n, d, spec.k);
    let ratio = DVector::from_iterator(d, vals.iter().zip(&target).map(|(&l, &t)| t / l.sqrt()));
    let mix = &v * DMatrix::from_diagonal(&ratio) * v.transpose();
    let a = g * mix;
    let eta = a.amax();
    DataMatrix::new(a, eta)
}

/// `A` i.i.d. `N(0,1)`, `x ~ N(0, μ²I)`, `b = A·x`. `η` covers both `A` and `b`.
pub fn gen_regression(spec: &SyntheticSpec) -> Result<RegressionData> {
    spec.validate()?;
    if spec.kind != SyntheticKind::Regression {
        return Err(Error::param("gen_regression needs a regression spec"));
    }
    let (n, d) = (spec.n, spec.d);
    let mut rng = stream_rng(derive_seed(spec.seed, &[REGRESSION_LABEL, n as u64, d as u64]), 0);
    let mu = spec.mu2.sqrt();
    let planted = DVector::from_fn(d, |_, _| mu * rng.sample::<f64, _>(StandardNormal));
    let a = gaussian_matrix(n, d, &mut rng);
    let b = &a * &planted;
    let eta = a.amax().max(b.amax());
    let data = DataMatrix::new(a, eta)?.with_target(b)?;
    Ok(RegressionData { data, planted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{projection_residual, ridge_solve};
    use crate::linalg::{frob2, top_eigen_sym};

    #[test]
    fn lowrank_spectrum_is_planted() {
        let (n, d, k) = (200, 8, 3);
        let data = gen_lowrank(&SyntheticSpec::lowrank(n, d, k, 1)).unwrap();
        let a = data.a();
        let nf = n as f64;
        let expected = nf + (d - k) as f64 / (nf * nf);
        assert!((frob2(a) - expected).abs() <= 1e-6 * expected);
        let (_, x) = top_eigen_sym(&gram(a), k);
        let tail = (d - k) as f64 / (nf * nf);
        assert!((projection_residual(a, &x) - tail).abs() < 1e-6);
        assert_eq!(data.eta(), a.amax());
    }

    #[test]
    fn full_rank_gap_has_no_residual() {
        let data = gen_lowrank(&SyntheticSpec::lowrank(50, 4, 4, 2)).unwrap();
        let (_, x) = top_eigen_sym(&gram(data.a()), 4);
        assert!(projection_residual(data.a(), &x) < 1e-9);
    }

    #[test]
    fn lowrank_is_deterministic() {
        let s = SyntheticSpec::lowrank(60, 5, 2, 9);
        assert_eq!(gen_lowrank(&s).unwrap().a(), gen_lowrank(&s).unwrap().a());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(gen_lowrank(&SyntheticSpec::lowrank(10, 5, 6, 0)).is_err());
        assert!(gen_lowrank(&SyntheticSpec::lowrank(3, 5, 2, 0)).is_err());
        assert!(gen_regression(&SyntheticSpec::regression(10, 2, 0.0, 0)).is_err());
    }

    #[test]
    fn ridge_recovers_planted_coefficients() {
        let reg = gen_regression(&SyntheticSpec::regression(10_000, 10, 4.0, 3)).unwrap();
        let sol = ridge_solve(reg.data.a(), reg.data.target().unwrap(), 1e-9).unwrap();
        assert!((sol.x - &reg.planted).norm() <= 1e-4 * reg.planted.norm());
    }

    #[test]
    fn target_energy_matches_prior() {
        // E‖b‖² = n·d·μ², averaged over independent instances.
        let (n, d, mu2) = (100_000, 10, 2.0);
        let runs = 400;
        let mean: f64 = (0..runs)
            .map(|r| gen_regression(&SyntheticSpec::regression(n, d, mu2, r)).unwrap().data.target().unwrap().norm_squared())
            .sum::<f64>()
            / runs as f64;
        let expected = (n * d) as f64 * mu2;
        assert!((mean - expected).abs() <= 0.05 * expected, "{mean} vs {expected}");
    }
}
