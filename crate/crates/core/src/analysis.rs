//! Analysis on released sketches, and central-model baselines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{canonical_order, gram, orthonormality_defect, right_singular, solve_spd, top_eigen_sym};
use crate::noise::PrivacyBudget;

/// A `d×k` orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankKProjection {
    #[serde(serialize_with = "row_major")]
    pub basis: DMatrix<f64>,
}

fn row_major<S: Serializer>(m: &DMatrix<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(ser)
}

fn as_slice<S: Serializer>(v: &DVector<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_slice().serialize(ser)
}

impl RankKProjection {
    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.basis)
    }
}

/// `‖Y − Y X Xᵀ‖_F²`.
pub fn projection_residual(y: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let r = y - (y * x) * x.transpose();
    r.norm_squared()
}

/// Top-`k` right singular vectors of the sketch `y`: the minimizer of
/// `‖Y − YXXᵀ‖_F` over orthonormal `d×k` matrices `X`.
pub fn lowrank_project(y: &DMatrix<f64>, k: usize) -> Result<RankKProjection> {
    let (m, d) = y.shape();
    if k == 0 || k > m.min(d) {
        return Err(Error::param(format!("k={k} outside 1..={}", m.min(d))));
    }
    let (_, v) = right_singular(y);
    Ok(RankKProjection { basis: v.columns(0, k).into_owned() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RidgeSolution {
    #[serde(serialize_with = "as_slice")]
    pub x: DVector<f64>,
    pub lambda: f64,
}

/// `x′ = (YᵀY + λI)⁻¹ Yᵀy`.
pub fn ridge_solve(ya: &DMatrix<f64>, yb: &DVector<f64>, lambda: f64) -> Result<RidgeSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda={lambda} must be positive")));
    }
    if ya.nrows() != yb.len() {
        return Err(Error::shape(format!("{} rows against {} targets", ya.nrows(), yb.len())));
    }
    let d = ya.ncols();
    let lhs = gram(ya) + DMatrix::<f64>::identity(d, d) * lambda;
    let rhs = ya.tr_mul(yb);
    solve_normal(&lhs, &rhs, lambda)
}

fn solve_normal(lhs: &DMatrix<f64>, rhs: &DVector<f64>, lambda: f64) -> Result<RidgeSolution> {
    let x = solve_spd(lhs, rhs)
        .ok_or_else(|| Error::Internal("regularized normal equations are not positive definite".into()))?;
    Ok(RidgeSolution { x, lambda })
}

/// Splits a joint sketch `[Y_A | y_b]` and solves the ridge problem on it.
pub fn ridge_from_joint(y: &DMatrix<f64>, lambda: f64) -> Result<RidgeSolution> {
    let d = y.ncols().checked_sub(1).ok_or_else(|| Error::shape("joint sketch has no columns"))?;
    let ya = y.columns(0, d).into_owned();
    let yb = y.column(d).into_owned();
    ridge_solve(&ya, &yb, lambda)
}

/// Noise scale used by a central baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScale {
    /// The baseline's own calibration formula.
    #[default]
    Formula,
    /// Fixed standard deviation per perturbed entry; `0` disables noise.
    Fixed(f64),
}

/// MOD-SULQ noise level for `n` rows of norm at most 1:
/// `β = (d+1)/(nε)·√(2 ln((d²+d)/(2√(2π)δ))) + 1/(n√ε)`.
pub fn modsulq_beta(n: usize, d: usize, budget: PrivacyBudget) -> f64 {
    let (nf, df, eps) = (n as f64, d as f64, budget.epsilon);
    let inner = (df * df + df) / (2.0 * (2.0 * std::f64::consts::PI).sqrt() * budget.delta);
    (df + 1.0) / (nf * eps) * (2.0 * inner.ln()).sqrt() + 1.0 / (nf * eps.sqrt())
}

fn symmetric_noise<R: Rng + ?Sized>(d: usize, std: f64, rng: &mut R) -> DMatrix<f64> {
    let mut n = DMatrix::<f64>::zeros(d, d);
    if std == 0.0 {
        return n;
    }
    for i in 0..d {
        for j in i..d {
            let v = std * rng.sample::<f64, _>(StandardNormal);
            n[(i, j)] = v;
            n[(j, i)] = v;
        }
    }
    n
}

pub fn max_row_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Central MOD-SULQ: rows are scaled by the largest row norm, the second
/// moment matrix `ÂᵀÂ/n` is perturbed with symmetric Gaussian noise, and the
/// top-`k` eigenvectors are returned.
pub fn central_modsulq<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    k: usize,
    budget: PrivacyBudget,
    scale: NoiseScale,
    rng: &mut R,
) -> Result<RankKProjection> {
    modsulq_from_gram(&gram(a), a.nrows(), max_row_norm(a), k, budget, scale, rng)
}

/// [`central_modsulq`] from a precomputed `AᵀA` and largest row norm.
pub fn modsulq_from_gram<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    n: usize,
    row_norm: f64,
    k: usize,
    budget: PrivacyBudget,
    scale: NoiseScale,
    rng: &mut R,
) -> Result<RankKProjection> {
    let d = g.ncols();
    if k == 0 || k > d {
        return Err(Error::param(format!("k={k} outside 1..={d}")));
    }
    let r = row_norm.max(f64::MIN_POSITIVE);
    let mut second = g / (r * r * n as f64);
    let std = match scale {
        NoiseScale::Formula => {
            budget.validate(crate::noise::NoiseFamily::Gaussian)?;
            modsulq_beta(n, d, budget)
        }
        NoiseScale::Fixed(s) => s,
    };
    second += symmetric_noise(d, std, rng);
    let (_, basis) = top_eigen_sym(&second, k);
    Ok(RankKProjection { basis })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SspSolution {
    pub solution: RidgeSolution,
    /// Negative eigenvalues of the perturbed Gram matrix clamped to 0.
    pub clamped: usize,
}

/// Central sufficient-statistics perturbation for ridge regression.
///
/// `AᵀA` and `Aᵀb` get Gaussian noise under replace-one-row neighbors, with
/// sensitivities `2R_a²` and `2R_a·R_b` (`R_a` the largest row norm, `R_b` the
/// largest target magnitude) and the budget split evenly between the two.
pub fn central_ssp<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    budget: PrivacyBudget,
    scale: NoiseScale,
    rng: &mut R,
) -> Result<SspSolution> {
    if !(lambda > 0.0) {
        return Err(Error::param(format!("lambda={lambda} must be positive")));
    }
    if a.nrows() != b.len() {
        return Err(Error::shape("A and b disagree on n"));
    }
    let d = a.ncols();
    let (std_gram, std_cross) = match scale {
        NoiseScale::Formula => {
            budget.validate(crate::noise::NoiseFamily::Gaussian)?;
            let ra = max_row_norm(a);
            let rb = b.amax();
            let c = (2.0 * (1.25 / (budget.delta / 2.0)).ln()).sqrt() / (budget.epsilon / 2.0);
            (c * 2.0 * ra * ra, c * 2.0 * ra * rb)
        }
        NoiseScale::Fixed(s) => (s, s),
    };
    let g = gram(a) + symmetric_noise(d, std_gram, rng);
    let mut ab = a.tr_mul(b);
    if std_cross > 0.0 {
        for v in ab.iter_mut() {
            *v += std_cross * rng.sample::<f64, _>(StandardNormal);
        }
    }
    // Clamp the spectrum of the perturbed Gram matrix at 0.
    let eig = ((&g + g.transpose()) * 0.5).symmetric_eigen();
    let clamped = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    let values: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let (vals, vecs) = canonical_order(&values, &eig.eigenvectors, 0.0);
    let psd = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
    let lhs = psd + DMatrix::<f64>::identity(d, d) * lambda;
    Ok(SspSolution { solution: solve_normal(&lhs, &ab, lambda)?, clamped })
}

/// `σ²_p = n·σ²_ltm·n^{−p}`: `p = 1` is the LTM calibration and `p = 0` puts
/// the whole aggregate noise on every client.
pub fn interpolated_sigma(sigma2_ltm: f64, n: usize, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("p={p} outside [0, 1]")));
    }
    let nf = n as f64;
    Ok(nf * sigma2_ltm * nf.powf(-p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;
    use crate::rng::stream_rng;

    fn gaussian(m: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 3);
        DMatrix::from_fn(m, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn full_rank_basis_leaves_no_residual() {
        let y = gaussian(8, 4, 1);
        let p = lowrank_project(&y, 4).unwrap();
        assert!(projection_residual(&y, &p.basis) < 1e-20);
        assert!(p.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn rank_one_is_recovered() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 0.0, 4.0]) / 5.0;
        let y = &u * v.transpose();
        let p = lowrank_project(&y, 1).unwrap();
        assert!(projection_residual(&y, &p.basis) < 1e-20);
        assert!((p.basis.column(0) - &v).norm() < 1e-12);
    }

    #[test]
    fn projection_beats_random_candidates() {
        let y = gaussian(6, 4, 2);
        let best = projection_residual(&y, &lowrank_project(&y, 2).unwrap().basis);
        let mut rng = stream_rng(4, 0);
        for _ in 0..1000 {
            assert!(best <= projection_residual(&y, &random_orthonormal(4, 2, &mut rng)) + 1e-12);
        }
    }

    #[test]
    fn bad_rank_is_rejected() {
        assert!(lowrank_project(&gaussian(3, 5, 0), 4).is_err());
        assert!(lowrank_project(&gaussian(3, 5, 0), 0).is_err());
    }

    #[test]
    fn ridge_limits() {
        let ya = gaussian(5, 3, 5);
        let zero = ridge_solve(&ya, &DVector::zeros(5), 1.0).unwrap();
        assert_eq!(zero.x, DVector::zeros(3));
        let yb = gaussian(5, 1, 6).column(0).into_owned();
        let big = ridge_solve(&ya, &yb, 1e12).unwrap();
        assert!(big.x.norm() <= 1e-9 * ya.tr_mul(&yb).norm());
        assert!(ridge_solve(&ya, &yb, 0.0).is_err());
    }

    #[test]
    fn ridge_matches_explicit_inverse() {
        let ya = gaussian(5, 3, 7);
        let yb = gaussian(5, 1, 8).column(0).into_owned();
        let sol = ridge_solve(&ya, &yb, 0.7).unwrap();
        let inv = (ya.transpose() * &ya + DMatrix::<f64>::identity(3, 3) * 0.7).try_inverse().unwrap();
        assert!((sol.x - inv * ya.transpose() * yb).norm() < 1e-10);
    }

    #[test]
    fn modsulq_without_noise_is_exact() {
        let a = gaussian(200, 6, 9);
        let mut rng = stream_rng(0, 0);
        let p = central_modsulq(&a, 2, PrivacyBudget::new(1.0, 1e-6), NoiseScale::Fixed(0.0), &mut rng).unwrap();
        let (_, exact) = top_eigen_sym(&gram(&a), 2);
        assert!((p.basis - exact).norm() < 1e-9);
    }

    #[test]
    fn modsulq_beta_reference() {
        // n=1000, d=10, ε=1, δ=1e-6: 11/1000·√(2 ln(110/(2√(2π)·1e-6))) + 1/1000
        let beta = modsulq_beta(1000, 10, PrivacyBudget::new(1.0, 1e-6));
        let inner = 110.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt() * 1e-6);
        assert!((beta - (0.011 * (2.0 * f64::ln(inner)).sqrt() + 0.001)).abs() < 1e-15);
    }

    #[test]
    fn ssp_without_noise_is_exact_ridge() {
        let a = gaussian(50, 3, 10);
        let b = gaussian(50, 1, 11).column(0).into_owned();
        let mut rng = stream_rng(0, 0);
        let ssp = central_ssp(&a, &b, 2.0, PrivacyBudget::new(1.0, 1e-6), NoiseScale::Fixed(0.0), &mut rng).unwrap();
        let exact = ridge_solve(&a, &b, 2.0).unwrap();
        assert!((ssp.solution.x - exact.x).norm() < 1e-10);
        assert_eq!(ssp.clamped, 0);
    }

    #[test]
    fn ssp_clamps_indefinite_gram() {
        let a = DMatrix::from_row_slice(2, 2, &[1e-3, 0.0, 0.0, 1e-3]);
        let b = DVector::from_vec(vec![1e-3, 1e-3]);
        let mut rng = stream_rng(1, 0);
        let ssp = central_ssp(&a, &b, 1.0, PrivacyBudget::new(1.0, 1e-6), NoiseScale::Fixed(10.0), &mut rng).unwrap();
        assert!(ssp.clamped > 0 || ssp.solution.x.iter().all(|v| v.is_finite()));
        assert!(ssp.solution.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn interpolation_anchors() {
        assert_eq!(interpolated_sigma(0.3, 1000, 1.0).unwrap(), 0.3);
        assert_eq!(interpolated_sigma(0.3, 1000, 0.0).unwrap(), 300.0);
        assert!((interpolated_sigma(0.3, 10_000, 0.5).unwrap() - 30.0).abs() < 1e-12);
        assert!(interpolated_sigma(0.3, 10, 1.5).is_err());
    }

    #[test]
    fn projection_json_is_row_major() {
        let p = RankKProjection { basis: DMatrix::from_row_slice(2, 1, &[0.6, 0.8]) };
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"basis":[[0.6],[0.8]]}"#);
    }
}
