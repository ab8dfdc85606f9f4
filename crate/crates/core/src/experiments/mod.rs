//! Figure-level drivers: noiseless bifurcation scans, stationary pump scans,
//! pump ramps and system-size sweeps.

mod beta;
mod bifurcation;
mod ramp;
mod stationary;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::model::ModelError;
use crate::sde::SdeError;
use crate::stats::StatsError;

pub use beta::{beta_sweep, BetaPoint, BetaSweepResult, BetaSweepSettings};
pub use bifurcation::{
    bifurcation_scan, settle, Attractor, BifurcationPoint, BifurcationResult, ScanSettings,
    FIGURE_PUMPS,
};
pub use ramp::{ramp_experiment, RampBin, RampResult, RampSettings};
pub use stationary::{
    stationary_point, stationary_scan, StationaryPoint, StationaryResult, StationarySettings,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

pub(crate) fn check_monotone(values: &[f64], what: &str) -> Result<(), ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Grid(format!("{what} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ExperimentError::Grid(format!("{what} grid has non-finite values")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExperimentError::Grid(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

/// Self-describing table shared by all drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub figure: String,
    pub control: String,
    pub columns: Vec<String>,
    /// First entry of each row is the control value; NaN marks a missing cell.
    pub rows: Vec<Vec<f64>>,
    pub metadata: serde_json::Value,
}

impl SweepResult {
    pub fn new(
        figure: &str,
        control: &str,
        columns: &[&str],
        rows: Vec<Vec<f64>>,
        metadata: serde_json::Value,
    ) -> Result<Self, ExperimentError> {
        let controls: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        check_monotone(&controls, control)?;
        if rows.iter().any(|r| r.len() != columns.len() + 1) {
            return Err(ExperimentError::Grid("row width does not match columns".into()));
        }
        Ok(Self {
            figure: figure.to_string(),
            control: control.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            metadata,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)? + 1;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn controls(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# figure={}", self.figure)?;
        write!(w, "{}", self.control)?;
        for c in &self.columns {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|v| if v.is_nan() { String::new() } else { v.to_string() })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "figure": self.figure,
            "control": self.control,
            "columns": self.columns,
            "points": self.rows.len(),
            "metadata": self.metadata,
        })
    }
}

pub(crate) fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// First downward zero crossing of `ys(xs)`, linearly interpolated.
pub fn locate_switching(xs: &[f64], ys: &[f64]) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        if y[0] >= 0.0 && y[1] < 0.0 {
            Some(x[0] + (x[1] - x[0]) * y[0] / (y[0] - y[1]))
        } else {
            None
        }
    })
}

/// Interior local minima whose prominence exceeds `min_prominence` times
/// the range of the curve. Returns their indices.
pub fn find_dips(ys: &[f64], min_prominence: f64) -> Vec<usize> {
    let finite: Vec<f64> = ys.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 3 {
        return Vec::new();
    }
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = min_prominence * (hi - lo);
    if !(threshold > 0.0) {
        return Vec::new();
    }
    let mut dips = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let v = ys[i];
        if !v.is_finite() {
            continue;
        }
        let left = ys[..i].iter().filter(|u| u.is_finite()).last();
        let right = ys[i + 1..].iter().find(|u| u.is_finite());
        if left.is_some_and(|&l| l < v) || right.is_some_and(|&r| r <= v) {
            continue;
        }
        // Prominence: rise needed on each side before reaching lower ground.
        let rise = |side: &mut dyn Iterator<Item = &f64>| {
            let mut peak = v;
            for &u in side.filter(|u| u.is_finite()) {
                if u < v {
                    break;
                }
                peak = peak.max(u);
            }
            peak - v
        };
        let l = rise(&mut ys[..i].iter().rev());
        let r = rise(&mut ys[i + 1..].iter());
        if l.min(r) >= threshold {
            dips.push(i);
        }
    }
    dips
}

/// Least-squares line `y = a + b x` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(StatsError::FitFailure("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit {
        intercept: my - slope * mx,
        slope,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switching_interpolates_zero_crossing() {
        let xs = [6.0, 6.01, 6.02, 6.03];
        let ys = [0.9, 0.4, -0.1, -0.8];
        assert!((locate_switching(&xs, &ys).unwrap() - 6.018).abs() < 1e-12);
        assert_eq!(locate_switching(&xs, &[1.0, 1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn dips_single_and_double() {
        let single = [1.0, 0.95, 0.8, 0.7, 0.8, 0.95, 1.0];
        assert_eq!(find_dips(&single, 0.3), vec![3]);
        let double = [1.0, 0.996, 0.995, 0.999, 1.0, 0.9995, 0.995, 0.997, 1.0];
        assert_eq!(find_dips(&double, 0.3), vec![2, 6]);
        // Counting-noise wiggles below the prominence threshold are ignored.
        let noisy = [1.0, 0.9, 0.7, 0.701, 0.7005, 0.8, 1.0];
        assert_eq!(find_dips(&noisy, 0.3).len(), 1);
        assert!(find_dips(&[1.0, 1.0, 1.0], 0.3).is_empty());
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sweep_result_requires_monotone_control() {
        let ok = SweepResult::new("1e", "P/P0", &["a"], vec![vec![1.0, 2.0], vec![2.0, f64::NAN]], serde_json::json!({}))
            .unwrap();
        let mut buf = Vec::new();
        ok.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# figure=1e\nP/P0,a\n1,2\n2,\n");
        assert!(SweepResult::new("1e", "P/P0", &["a"], vec![vec![2.0, 0.0], vec![1.0, 0.0]], serde_json::json!({})).is_err());
    }
}
