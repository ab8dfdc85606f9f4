use rustfft::{num_complex::Complex, FftPlanner};

use super::StatsError;

/// Biased autocovariance of `x` for lags `0..n`, via zero-padded FFT.
pub fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// Full width at half maximum of the normalized autocovariance, `2 tau_half`,
/// with `tau_half` linearly interpolated between samples.
pub fn autocorr_width(x: &[f64], dt: f64) -> Result<f64, StatsError> {
    if x.len() < 4 {
        return Err(StatsError::TooFewSamples {
            needed: 4,
            got: x.len(),
        });
    }
    let c = autocovariance(x);
    if !(c[0] > 0.0) {
        return Err(StatsError::Domain("trace has zero variance".into()));
    }
    // Lags beyond half the record are too noisy to trust.
    let usable = c.len() / 2;
    for k in 1..usable {
        let r = c[k] / c[0];
        if r < 0.5 {
            let prev = c[k - 1] / c[0];
            let frac = (prev - 0.5) / (prev - r);
            return Ok(2.0 * (k as f64 - 1.0 + frac) * dt);
        }
    }
    Err(StatsError::InsufficientLength(usable))
}

/// One-pole low-pass filter with cutoff `f_c` (GHz) at sample spacing `dt` (ns).
pub fn lowpass(x: &[f64], dt: f64, f_c: f64) -> Vec<f64> {
    let a = -(-2.0 * std::f64::consts::PI * f_c * dt).exp_m1();
    let mut out = Vec::with_capacity(x.len());
    let mut y = match x.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in x {
        y += a * (v - y);
        out.push(y);
    }
    out
}
