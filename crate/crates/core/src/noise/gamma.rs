//! Gamma sampling, including the shape ≪ 1 regime used by per-client noise.
//!
//! For shape `α < 1` we use the rejection sampler of Liu, Martin and Syring
//! (2017). If `X ~ Γ(α, 1)` then `Z = −α·ln X` has density proportional to
//! `exp(−z − e^{−z/α})`, which is dominated by the two-sided exponential
//! envelope `e^{−z}` on `z ≥ 0` and `e^{λz − 1}` on `z < 0`, `λ = 1/α − 1`.
//! Sampling `Z` and returning `ln X = −Z/α` stays accurate for tiny shapes,
//! where the usual `Γ(α+1)·U^{1/α}` boost loses all precision. The acceptance
//! rate tends to 1 as `α → 0` but collapses as `α → 1`, so shapes in
//! `[0.25, 1)` use the boost `ln Γ(α+1) + ln(U)/α` evaluated in log space.
//!
//! Shapes `≥ 1` go to `rand_distr::Gamma` (Marsaglia–Tsang).

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

/// `ln X` for `X ~ Γ(alpha, 1)`, `0 < alpha < 1`.
pub fn ln_gamma_small<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let lambda = 1.0 / alpha - 1.0;
    let w = alpha / (std::f64::consts::E * (1.0 - alpha));
    let r = 1.0 / (1.0 + w);
    loop {
        let u: f64 = rng.random();
        let e: f64 = rng.sample(Exp1);
        let z = if u <= r { e } else { -e / lambda };
        // log of target over envelope on the chosen side
        let log_ratio = if z >= 0.0 {
            -(-z / alpha).exp()
        } else {
            1.0 - z / alpha - (-z / alpha).exp()
        };
        let e2: f64 = rng.sample(Exp1);
        if -e2 <= log_ratio {
            return -z / alpha;
        }
    }
}

const BOOST_MIN_SHAPE: f64 = 0.25;

/// One draw from `Γ(shape, scale)`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    assert!(shape > 0.0 && scale > 0.0, "gamma parameters must be positive");
    if shape < BOOST_MIN_SHAPE {
        scale * ln_gamma_small(shape, rng).exp()
    } else if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("validated parameters").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        scale * (g.ln() + u.ln() / shape).exp()
    } else {
        Gamma::new(shape, scale).expect("validated parameters").sample(rng)
    }
}

/// One draw of `X − Y` with `X, Y ~ Γ(shape, scale)` independent.
pub fn sample_gamma_difference<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    sample_gamma(shape, scale, rng) - sample_gamma(shape, scale, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::stats::{ks_pvalue, ks_statistic, mean_std};

    #[test]
    fn small_shape_moments() {
        let mut rng = stream_rng(1, 0);
        for alpha in [0.05, 0.2, 0.3, 0.9, 1.0 - 1e-12] {
            let xs: Vec<f64> = (0..200_000).map(|_| sample_gamma(alpha, 2.0, &mut rng)).collect();
            let (m, sd) = mean_std(&xs);
            let se = 2.0 * alpha.sqrt() / (xs.len() as f64).sqrt();
            assert!((m - 2.0 * alpha).abs() < 5.0 * se, "alpha={alpha} mean={m}");
            let var = sd * sd;
            assert!((var / (4.0 * alpha) - 1.0).abs() < 0.1, "alpha={alpha} var={var}");
        }
    }

    #[test]
    fn shape_one_difference_is_laplace() {
        let mut rng = stream_rng(2, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| sample_gamma_difference(1.0, 3.0, &mut rng)).collect();
        let d = ks_statistic(&xs, |x| crate::stats::laplace_cdf(x, 3.0));
        assert!(ks_pvalue(d, xs.len()) > 0.01);
    }

    #[test]
    fn log_domain_survives_tiny_shapes() {
        let mut rng = stream_rng(3, 0);
        let alpha = 1e-5;
        let logs: Vec<f64> = (0..10_000).map(|_| ln_gamma_small(alpha, &mut rng)).collect();
        assert!(logs.iter().all(|l| l.is_finite()));
        // P(X > 1) = Γ(α, 1)/Γ(α) ≈ α·E₁(1) ≈ 2.2e-6, so almost all draws are tiny.
        assert!(logs.iter().filter(|&&l| l > 0.0).count() <= 2);
    }

    #[test]
    fn small_shape_cdf_matches_exponential_power() {
        // P(X^α ≤ u) = γ(α, u^{1/α})/Γ(α) ≈ u/Γ(1+α), so X^α is close to U(0,1).
        let mut rng = stream_rng(4, 0);
        let alpha = 1e-3;
        let us: Vec<f64> = (0..20_000).map(|_| (alpha * ln_gamma_small(alpha, &mut rng)).exp()).collect();
        let d = ks_statistic(&us, |u| u.clamp(0.0, 1.0));
        assert!(d < 0.02, "D={d}");
    }
}
