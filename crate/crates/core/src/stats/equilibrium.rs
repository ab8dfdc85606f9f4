//! Truncated exponential `rho(x) = N exp(-lambda x)` on [-1, 1].

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Largest |lambda| the maximum-likelihood solver reports.
pub const LAMBDA_LIMIT: f64 = 500.0;

/// Minimum sample count accepted by [`fit_equilibrium`].
pub const MIN_FIT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumFit {
    pub lambda: f64,
    /// `lambda / (2 sinh lambda)`.
    pub normalization: f64,
    /// Asymptotic standard error from the Fisher information.
    pub lambda_stderr: f64,
    /// Kolmogorov-Smirnov distance to the fitted density.
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub count: usize,
}

/// `lambda / (2 sinh lambda)`, evaluated without overflow; 1/2 at zero.
pub fn equilibrium_normalization(lambda: f64) -> f64 {
    let l = lambda.abs();
    if l < 1e-8 {
        return 0.5 * (1.0 - l * l / 6.0);
    }
    l * (-l).exp() / (-(-2.0 * l).exp_m1())
}

pub fn equilibrium_density(x: f64, lambda: f64) -> f64 {
    if !(-1.0..=1.0).contains(&x) {
        return 0.0;
    }
    (equilibrium_normalization(lambda).ln() - lambda * x).exp()
}

pub fn equilibrium_cdf(x: f64, lambda: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if lambda.abs() < 1e-12 {
        return 0.5 * (x + 1.0);
    }
    if lambda < 0.0 {
        return 1.0 - equilibrium_cdf(-x, -lambda);
    }
    (-lambda * (x + 1.0)).exp_m1() / (-2.0 * lambda).exp_m1()
}

/// Mean of the density: `-(coth lambda - 1/lambda)`.
pub fn equilibrium_mean(lambda: f64) -> f64 {
    -langevin(lambda)
}

fn langevin(l: f64) -> f64 {
    let a = l.abs();
    if a < 1e-3 {
        let l2 = l * l;
        return l / 3.0 - l * l2 / 45.0 + 2.0 * l * l2 * l2 / 945.0;
    }
    if a > 20.0 {
        return l.signum() - 1.0 / l;
    }
    1.0 / l.tanh() - 1.0 / l
}

/// Variance of x under the density, `1/lambda^2 - 1/sinh^2 lambda`.
fn langevin_derivative(l: f64) -> f64 {
    let a = l.abs();
    if a < 1e-3 {
        return 1.0 / 3.0 - l * l / 15.0;
    }
    let s = if a > 350.0 { f64::INFINITY } else { l.sinh() };
    1.0 / (l * l) - 1.0 / (s * s)
}

/// Kolmogorov distribution tail `Q(t) = 2 sum_k (-1)^(k-1) exp(-2 k^2 t^2)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult, StatsError> {
    let n = samples.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sn = nf.sqrt();
    let p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
    })
}

/// Maximum-likelihood fit of the truncated exponential.
///
/// The score equation reduces to `coth(lambda) - 1/lambda = -<x>`, solved by
/// bisection on the monotone Langevin function.
pub fn fit_equilibrium(samples: &[f64]) -> Result<EquilibriumFit, StatsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|x| !(x.abs() <= 1.0)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let target = -mean;
    let (mut lo, mut hi) = (-LAMBDA_LIMIT, LAMBDA_LIMIT);
    if target <= langevin(lo) {
        hi = lo;
    } else if target >= langevin(hi) {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if langevin(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
    }
    let lambda = 0.5 * (lo + hi);
    let info = langevin_derivative(lambda);
    let ks = ks_test(samples, |x| equilibrium_cdf(x, lambda))?;
    Ok(EquilibriumFit {
        lambda,
        normalization: equilibrium_normalization(lambda),
        lambda_stderr: 1.0 / (n * info).sqrt(),
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Inverse-CDF sampler, written from the closed form of the CDF.
    fn draw(lambda: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if lambda == 0.0 {
                    2.0 * u - 1.0
                } else {
                    -1.0 - (1.0 - u * (1.0 - (-2.0 * lambda).exp())).ln() / lambda
                }
            })
            .collect()
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn normalization_integrates_to_one() {
        for lambda in [-40.0, -3.0, -0.2, 0.0, 1e-9, 0.7, 5.0, 40.0] {
            let integral = simpson(|x| equilibrium_density(x, lambda), -1.0, 1.0, 20_000);
            assert!((integral - 1.0).abs() < 1e-10, "{lambda}: {integral}");
        }
        assert_eq!(equilibrium_normalization(0.0), 0.5);
        assert!(equilibrium_normalization(800.0).is_finite());
    }

    #[test]
    fn cdf_and_mean_match_quadrature() {
        for lambda in [-2.5, 0.3, 4.0] {
            for x in [-0.7, 0.0, 0.55] {
                let q = simpson(|u| equilibrium_density(u, lambda), -1.0, x, 10_000);
                assert!((equilibrium_cdf(x, lambda) - q).abs() < 1e-10);
            }
            let m = simpson(|u| u * equilibrium_density(u, lambda), -1.0, 1.0, 20_000);
            assert!((equilibrium_mean(lambda) - m).abs() < 1e-10);
        }
        // Series branch against the closed form just outside it.
        assert!((langevin(1.1e-3) - (1.0 / 1.1e-3f64.tanh() - 1.0 / 1.1e-3)).abs() < 1e-12);
    }

    #[test]
    fn flat_samples_give_zero_lambda() {
        let xs = draw(0.0, 50_000, 1);
        let fit = fit_equilibrium(&xs).unwrap();
        assert!(fit.lambda.abs() < 3.0 * fit.lambda_stderr, "{fit:?}");
        assert!((fit.normalization - 0.5).abs() < 0.01);
        assert!(fit.ks_p_value > 0.01);
    }

    #[test]
    fn recovers_lambda_three() {
        let xs = draw(3.0, 100_000, 2);
        let fit = fit_equilibrium(&xs).unwrap();
        assert!((fit.lambda - 3.0).abs() < 0.1, "{fit:?}");
        assert!(fit.ks_p_value > 0.01);
        let neg = fit_equilibrium(&draw(-3.0, 100_000, 3)).unwrap();
        assert!((neg.lambda + 3.0).abs() < 0.1);
    }

    #[test]
    fn ks_rejects_wrong_density() {
        let xs = draw(3.0, 5_000, 4);
        let flat = ks_test(&xs, |x| equilibrium_cdf(x, 0.0)).unwrap();
        assert!(flat.p_value < 1e-6);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let mut xs = draw(0.0, 200, 5);
        assert!(fit_equilibrium(&xs[..50]).is_err());
        xs[10] = 1.5;
        assert_eq!(fit_equilibrium(&xs), Err(StatsError::OutOfRange(1.5)));
        let ones = vec![1.0; 200];
        assert_eq!(fit_equilibrium(&ones).unwrap().lambda, -LAMBDA_LIMIT);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Tabulated: Q(1.36) ~ 0.049, Q(1.63) ~ 0.010.
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }
}
