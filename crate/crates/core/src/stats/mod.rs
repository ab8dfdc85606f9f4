//! Estimators: moments of the imbalance and order parameter, zero-delay
//! correlations, joint histograms, equilibrium fits and signal tools.

mod equilibrium;
mod histogram;
mod moments;
mod signal;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use equilibrium::{
    equilibrium_cdf, equilibrium_density, equilibrium_mean, equilibrium_normalization,
    fit_equilibrium, kolmogorov_survival, ks_test, EquilibriumFit, KsResult,
};
pub use histogram::{chi2_flatness, histogram_1d, joint_histogram, Edges, JointHistogram};
pub use moments::{MomentAccumulator, Obs, Sample};
pub use signal::{autocorr_width, autocovariance, lowpass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("mean intensity is zero")]
    ZeroMean,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sample {0} lies outside [-1, 1]")]
    OutOfRange(f64),
    #[error("bin edges must be finite and strictly increasing")]
    EdgeOrdering,
    #[error("trace too short: autocovariance never falls below half maximum within {0} lags")]
    InsufficientLength(usize),
    #[error("fit failure: {0}")]
    FitFailure(String),
}

/// Zero-delay correlations and order-parameter moments of one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub count: u64,
    pub g2_bb: f64,
    pub g2_aa: f64,
    pub g2_ba: f64,
    pub g2_ii: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
    pub var_x: f64,
    pub mean_a: f64,
    pub var_a: f64,
    pub mean_i_tot: f64,
}

/// `<I_i I_j> / (<I_i> <I_j>)` over paired samples.
pub fn g2_zero(samples_i: &[f64], samples_j: &[f64]) -> Result<f64, StatsError> {
    if samples_i.len() != samples_j.len() {
        return Err(StatsError::LengthMismatch(samples_i.len(), samples_j.len()));
    }
    let n = samples_i.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let (mut si, mut sj, mut sij) = (0.0, 0.0, 0.0);
    for (a, b) in samples_i.iter().zip(samples_j) {
        si += a;
        sj += b;
        sij += a * b;
    }
    let nf = n as f64;
    let (mi, mj) = (si / nf, sj / nf);
    if !(mi > 0.0 && mj > 0.0) {
        return Err(StatsError::ZeroMean);
    }
    Ok(sij / nf / (mi * mj))
}

/// Outcome of the decorrelated-intensity relation for `g2_BA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum CrossPrediction {
    Value(f64),
    /// `<x>^2` too close to one: single-mode operation, no usable number.
    Degenerate,
}

impl CrossPrediction {
    pub fn value(self) -> Option<f64> {
        match self {
            CrossPrediction::Value(v) => Some(v),
            CrossPrediction::Degenerate => None,
        }
    }
}

/// Below this `1 - <x>^2` the prediction is reported as degenerate.
pub const SINGLE_MODE_TOLERANCE: f64 = 1e-9;

/// `g2_II (1 - <x^2>) / (1 - <x>^2)`, valid when `I_tot` and `x` fluctuate independently.
pub fn cross_from_imbalance(
    g2_ii: f64,
    mean_x: f64,
    mean_x2: f64,
) -> Result<CrossPrediction, StatsError> {
    if !(mean_x.abs() < 1.0) {
        return Err(StatsError::Domain(format!("|<x>| = {} must be below 1", mean_x.abs())));
    }
    if !(mean_x2 <= 1.0 + 1e-12) {
        return Err(StatsError::Domain(format!("<x^2> = {mean_x2} exceeds 1")));
    }
    let denom = 1.0 - mean_x * mean_x;
    if mean_x * mean_x > mean_x2 + 1e-12 * denom.max(1e-300).max(mean_x2) {
        return Err(StatsError::Domain(format!(
            "<x>^2 = {} exceeds <x^2> = {mean_x2}",
            mean_x * mean_x
        )));
    }
    if denom < SINGLE_MODE_TOLERANCE {
        return Ok(CrossPrediction::Degenerate);
    }
    Ok(CrossPrediction::Value(g2_ii * (1.0 - mean_x2) / denom))
}

/// `<A> ~ sqrt(g2_BA)`, neglecting amplitude fluctuations; meaningful only
/// close to the switching point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimate {
    pub mean_a: f64,
    pub approximation: bool,
}

pub fn amplitude_from_cross(g2_ba: f64) -> AmplitudeEstimate {
    AmplitudeEstimate {
        mean_a: g2_ba.sqrt(),
        approximation: true,
    }
}

/// Imbalance moments rebuilt from mean modal intensities and `g2_ij` alone,
/// assuming `I_tot` and `x` fluctuate independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Moments {
    pub mean_x: f64,
    pub mean_x2: f64,
    pub var_x: f64,
    /// `<A^2> = 1 - <x^2>`.
    pub mean_a2: f64,
}

pub fn moments_from_g2(
    mean_b: f64,
    mean_a: f64,
    g2_bb: f64,
    g2_aa: f64,
    g2_ba: f64,
) -> Result<G2Moments, StatsError> {
    let tot = mean_b + mean_a;
    if !(tot > 0.0) {
        return Err(StatsError::ZeroMean);
    }
    let bb = g2_bb * mean_b * mean_b;
    let aa = g2_aa * mean_a * mean_a;
    let ba = g2_ba * mean_b * mean_a;
    let i2 = bb + aa + 2.0 * ba;
    let mean_x = (mean_b - mean_a) / tot;
    let mean_x2 = (bb + aa - 2.0 * ba) / i2;
    Ok(G2Moments {
        mean_x,
        mean_x2,
        var_x: mean_x2 - mean_x * mean_x,
        mean_a2: 1.0 - mean_x2,
    })
}

impl MomentAccumulator {
    pub fn g2_moments(&self) -> Result<G2Moments, StatsError> {
        moments_from_g2(
            self.mean(Obs::IB),
            self.mean(Obs::IA),
            self.g2(Obs::IB, Obs::IB)?,
            self.g2(Obs::IA, Obs::IA)?,
            self.g2(Obs::IB, Obs::IA)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, Poisson};

    #[test]
    fn g2_of_constant_series_is_one() {
        let v = vec![4.2; 100];
        assert!((g2_zero(&v, &v).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn g2_is_symmetric_and_validates() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 0.5, 1.0];
        assert_eq!(g2_zero(&a, &b).unwrap(), g2_zero(&b, &a).unwrap());
        assert_eq!(g2_zero(&a, &b[..2]), Err(StatsError::LengthMismatch(3, 2)));
        assert!(matches!(g2_zero(&a[..1], &b[..1]), Err(StatsError::TooFewSamples { .. })));
        assert_eq!(g2_zero(&[0.0, 0.0], &[1.0, 1.0]), Err(StatsError::ZeroMean));
    }

    #[test]
    fn uniform_imbalance_gives_two_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let (mut ib, mut ia) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..=1.0);
            ib.push(0.5 * (1.0 + x));
            ia.push(0.5 * (1.0 - x));
        }
        let g = g2_zero(&ib, &ia).unwrap();
        assert!((g - 2.0 / 3.0).abs() < 0.005, "{g}");
    }

    #[test]
    fn thermal_series_gives_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..400_000).map(|_| Exp1.sample(&mut rng)).collect();
        let g: f64 = g2_zero(&v, &v).unwrap();
        assert!((g - 2.0).abs() < 0.03, "{g}");
    }

    #[test]
    fn poissonian_counts_have_g2_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pois = Poisson::new(500.0).unwrap();
        let v: Vec<f64> = (0..100_000).map(|_| pois.sample(&mut rng)).collect();
        // Poisson counts: <n^2>/<n>^2 = 1 + 1/<n>.
        let g = g2_zero(&v, &v).unwrap();
        assert!((g - (1.0 + 1.0 / 500.0)).abs() < 1e-3, "{g}");
    }

    #[test]
    fn cross_prediction_examples() {
        let v = cross_from_imbalance(1.0, 0.0, 1.0 / 3.0).unwrap().value().unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        let v = cross_from_imbalance(1.0, 0.4, 0.16).unwrap().value().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(cross_from_imbalance(1.0, 1.0, 1.0).is_err());
        assert!(cross_from_imbalance(1.0, 0.2, 0.01).is_err());
        assert!(cross_from_imbalance(1.0, 0.0, 1.5).is_err());
        assert_eq!(
            cross_from_imbalance(1.0, 1.0 - 1e-12, 1.0 - 2e-12).unwrap(),
            CrossPrediction::Degenerate
        );
    }

    #[test]
    fn amplitude_examples() {
        assert!((amplitude_from_cross(2.0 / 3.0).mean_a - 0.816_496_580_927_726).abs() < 1e-12);
        assert_eq!(amplitude_from_cross(1.0).mean_a, 1.0);
        let e = amplitude_from_cross(0.7);
        assert!((e.mean_a - 0.837).abs() < 5e-4);
        assert!(e.approximation);
    }

    #[test]
    fn g2_moments_match_direct_moments_for_independent_factors() {
        let mut acc = MomentAccumulator::new();
        for &i in &[700.0, 1000.0, 1500.0] {
            for &x in &[-0.6, 0.0, 0.2, 0.9] {
                acc.push(&Sample::from_modal(0.5 * i * (1.0 + x), 0.5 * i * (1.0 - x)).unwrap());
            }
        }
        let g = acc.g2_moments().unwrap();
        assert!((g.mean_x - acc.mean(Obs::X)).abs() < 1e-12);
        assert!((g.mean_x2 - acc.moment2(Obs::X, Obs::X)).abs() < 1e-12);
        assert!((g.mean_a2 - (1.0 - acc.moment2(Obs::X, Obs::X))).abs() < 1e-12);
    }

    #[test]
    fn direct_and_decorrelated_routes_agree_exactly_for_independent_factors() {
        // Every (I, x) pair of two independent marginals: <I x> = <I><x> holds exactly.
        let intensities = [800.0, 1000.0, 1100.0, 1300.0];
        let xs = [-0.9, -0.3, 0.1, 0.5, 0.8];
        let mut acc = MomentAccumulator::new();
        for &i in &intensities {
            for &x in &xs {
                acc.push(&Sample::from_modal(0.5 * i * (1.0 + x), 0.5 * i * (1.0 - x)).unwrap());
            }
        }
        let c = acc.correlation_set().unwrap();
        let pred = cross_from_imbalance(c.g2_ii, c.mean_x, c.mean_x2)
            .unwrap()
            .value()
            .unwrap();
        assert!((pred - c.g2_ba).abs() < 1e-12, "{pred} vs {}", c.g2_ba);
    }
}
