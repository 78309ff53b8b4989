//! Summary statistics and distribution tests used by diagnostics and experiments.

/// Mean and unbiased sample standard deviation. The deviation is 0 for fewer than two values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let (_, sd) = mean_std(xs);
    sd * sd
}

/// Sample skewness (biased moment estimator).
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// One-sample Kolmogorov–Smirnov statistic `D = sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let lo = f - i as f64 / n;
        let hi = (i + 1) as f64 / n - f;
        d.max(lo).max(hi)
    })
}

/// Asymptotic p-value of the KS statistic for `n` samples (Kolmogorov distribution,
/// with the Stephens small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-1.0_f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pearson chi-square statistic against a uniform distribution over `counts.len()` cells.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum()
}

/// Upper-tail critical value of the chi-square distribution via the
/// Wilson–Hilferty approximation; `z` is the standard normal quantile.
pub fn chi_square_critical(dof: usize, z: f64) -> f64 {
    let k = dof as f64;
    let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
    k * t * t * t
}
