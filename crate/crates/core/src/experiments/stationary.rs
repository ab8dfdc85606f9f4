use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bifurcation::{bifurcation_scan, Attractor, ScanSettings};
use super::{check_monotone, locate_switching, opt, ExperimentError, SweepResult};
use crate::ensemble::{derive_seed, fold_trajectories, phase_aligned_state, PhaseBranch};
use crate::model::{transparency_pump, CavityState, PhysicalParams, PumpSchedule};
use crate::sde::{Diagnostics, Integrator, IntegratorConfig, DEFAULT_DT};
use crate::stats::{
    autocorr_width, cross_from_imbalance, equilibrium_cdf, fit_equilibrium, ks_test,
    CorrelationSet, EquilibriumFit, KsResult, MomentAccumulator, Sample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarySettings {
    pub n_traj: usize,
    /// Discarded time after the start state (ns).
    pub transient: f64,
    /// Averaging window per trajectory (ns).
    pub window: f64,
    /// Steps between retained samples.
    pub sample_stride: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub lanes: usize,
    /// Seeds every pump from a noiseless continuation; `None` starts from
    /// the slightly tilted bonding state instead.
    pub relax: Option<ScanSettings>,
    /// Keep the `x` and `I_B` traces for correlation widths and the
    /// equilibrium fit.
    pub traces: bool,
}

impl Default for StationarySettings {
    fn default() -> Self {
        Self {
            n_traj: 4,
            transient: 50.0,
            window: 200.0,
            sample_stride: 100,
            dt: DEFAULT_DT,
            master_seed: 0,
            lanes: 0,
            relax: None,
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub pump_ratio: f64,
    pub correlations: CorrelationSet,
    /// Decorrelated-intensity prediction of `g2_BA`; `None` when single-mode.
    pub cross_prediction: Option<f64>,
    pub lambda: Option<EquilibriumFit>,
    /// Kolmogorov-Smirnov test of the decimated `x` samples against the flat density.
    pub flat_ks: Option<KsResult>,
    /// Full width at half maximum of the `x` autocorrelation (ns).
    pub x_width: Option<f64>,
    /// Same for the bonding-mode intensity.
    pub i_b_width: Option<f64>,
    pub below_threshold: bool,
    pub diagnostics: Diagnostics,
}

struct WindowOutput {
    acc: MomentAccumulator,
    x: Vec<f64>,
    i_b: Vec<f64>,
    diag: Diagnostics,
}

fn mean_of(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Stationary statistics at one pump, time-averaged over the window of each
/// trajectory and pooled over trajectories in index order.
pub fn stationary_point(
    p: &PhysicalParams,
    pump_ratio: f64,
    start: &CavityState,
    settings: &StationarySettings,
    seed: u64,
) -> Result<StationaryPoint, ExperimentError> {
    let pump = pump_ratio * transparency_pump(p);
    let icfg = IntegratorConfig {
        dt: settings.dt,
        record_stride: settings.sample_stride.max(1),
        ..IntegratorConfig::default()
    };
    let integ = Integrator::new(p, &icfg)?;
    let schedule = PumpSchedule::constant(pump, settings.window.max(settings.transient).max(settings.dt))?;
    let transient_steps = if settings.transient > 0.0 {
        integ.steps_for(settings.transient)
    } else {
        0
    };
    let window_steps = integ.steps_for(settings.window);
    let sample_dt = settings.dt * icfg.record_stride as f64;

    let mut acc = MomentAccumulator::new();
    let mut diagnostics = Diagnostics::default();
    let mut x_widths = Vec::new();
    let mut i_b_widths = Vec::new();
    let mut decimated = Vec::new();
    fold_trajectories(
        settings.n_traj,
        seed,
        settings.lanes,
        |_, rng| {
            let mut diag = Diagnostics::default();
            let mut s = *start;
            if transient_steps > 0 {
                s = integ.run(&s, &schedule, transient_steps, rng, &mut diag, |_, _| {})?;
            }
            let mut out = WindowOutput {
                acc: MomentAccumulator::new(),
                x: Vec::new(),
                i_b: Vec::new(),
                diag: Diagnostics::default(),
            };
            integ.run(&s, &schedule, window_steps, rng, &mut diag, |k, st| {
                if k == 0 {
                    return;
                }
                match Sample::from_state(st) {
                    Some(sample) => {
                        out.acc.push(&sample);
                        if settings.traces {
                            out.x.push(sample.0[crate::stats::Obs::X as usize]);
                            out.i_b.push(sample.0[crate::stats::Obs::IB as usize]);
                        }
                    }
                    None => out.acc.degenerate += 1,
                }
            })?;
            out.diag = diag;
            Ok(out)
        },
        |_, out| {
            acc.merge(&out.acc);
            diagnostics.merge(&out.diag);
            if settings.traces {
                if let Ok(w) = autocorr_width(&out.x, sample_dt) {
                    x_widths.push(w);
                    // Two widths apart, successive samples are nearly uncorrelated.
                    let step = ((2.0 * w / sample_dt).ceil() as usize).max(1);
                    decimated.extend(out.x.iter().step_by(step));
                }
                if let Ok(w) = autocorr_width(&out.i_b, sample_dt) {
                    i_b_widths.push(w);
                }
            }
        },
    )?;
    let correlations = acc.correlation_set()?;
    let cross_prediction =
        cross_from_imbalance(correlations.g2_ii, correlations.mean_x, correlations.mean_x2)
            .ok()
            .and_then(|c| c.value());
    Ok(StationaryPoint {
        pump_ratio,
        correlations,
        cross_prediction,
        lambda: fit_equilibrium(&decimated).ok(),
        flat_ks: ks_test(&decimated, |x| equilibrium_cdf(x, 0.0)).ok(),
        x_width: mean_of(&x_widths),
        i_b_width: mean_of(&i_b_widths),
        below_threshold: crate::model::bonding_fixed_point(pump, p).is_none(),
        diagnostics,
    })
}

pub(crate) fn off_state(pump: f64, p: &PhysicalParams) -> CavityState {
    let n = pump / p.gamma_tot;
    let a = Complex64::new(1.0, 0.0);
    CavityState::new(a, a, n, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryResult {
    pub beta: f64,
    pub points: Vec<StationaryPoint>,
    /// Zero crossing of `<x>` along the pump axis.
    pub switching_point: Option<f64>,
    /// Hopf estimates from the seeding continuation, when one was run.
    pub hopf: Option<[Option<f64>; 2]>,
}

impl StationaryResult {
    pub fn pumps(&self) -> Vec<f64> {
        self.points.iter().map(|q| q.pump_ratio).collect()
    }

    pub fn series<F: Fn(&StationaryPoint) -> f64>(&self, f: F) -> Vec<f64> {
        self.points.iter().map(f).collect()
    }

    pub fn to_sweep(&self, figure: &str) -> Result<SweepResult, ExperimentError> {
        let rows = self
            .points
            .iter()
            .map(|q| {
                let c = &q.correlations;
                vec![
                    q.pump_ratio,
                    c.g2_bb,
                    c.g2_aa,
                    c.g2_ba,
                    c.g2_ii,
                    c.mean_x,
                    c.var_x,
                    c.mean_a,
                    c.var_a,
                    c.mean_i_tot,
                    opt(q.cross_prediction),
                    opt(q.lambda.map(|l| l.lambda)),
                    opt(q.lambda.map(|l| l.lambda_stderr)),
                    opt(q.lambda.map(|l| l.ks_p_value)),
                    opt(q.flat_ks.map(|k| k.p_value)),
                    opt(q.x_width),
                    opt(q.i_b_width),
                    if q.below_threshold { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        SweepResult::new(
            figure,
            "P/P0",
            &[
                "g2_BB",
                "g2_AA",
                "g2_BA",
                "g2_II",
                "mean_x",
                "var_x",
                "mean_A",
                "var_A",
                "mean_I_tot",
                "g2_BA_decorrelated",
                "Lambda",
                "Lambda_stderr",
                "KS_p",
                "KS_flat_p",
                "x_width_ns",
                "I_B_width_ns",
                "below_threshold",
            ],
            rows,
            serde_json::json!({
                "beta": self.beta,
                "switching_point": self.switching_point,
                "hopf": self.hopf,
            }),
        )
    }
}

/// Stationary statistics over an increasing pump grid.
pub fn stationary_scan(
    pump_ratios: &[f64],
    p: &PhysicalParams,
    settings: &StationarySettings,
) -> Result<StationaryResult, ExperimentError> {
    check_monotone(pump_ratios, "pump")?;
    let (starts, hopf): (Vec<CavityState>, _) = match &settings.relax {
        Some(scan) => {
            let b = bifurcation_scan(pump_ratios, p, scan)?;
            let starts = b
                .points
                .iter()
                .map(|q| match q.attractor {
                    Attractor::Off => off_state(q.pump_ratio * transparency_pump(p), p),
                    _ => q.final_state,
                })
                .collect();
            (starts, Some(b.hopf))
        }
        None => (
            pump_ratios
                .iter()
                .map(|&r| {
                    let pump = r * transparency_pump(p);
                    phase_aligned_state(
                        pump,
                        p,
                        std::f64::consts::FRAC_PI_2 - ScanSettings::default().tilt,
                        PhaseBranch::InPhase,
                    )
                    .unwrap_or_else(|_| off_state(pump, p))
                })
                .collect(),
            None,
        ),
    };
    let mut points = Vec::with_capacity(pump_ratios.len());
    for (i, (&r, start)) in pump_ratios.iter().zip(&starts).enumerate() {
        let seed = derive_seed(settings.master_seed, i as u64);
        points.push(stationary_point(p, r, start, settings, seed)?);
    }
    let mean_x: Vec<f64> = points.iter().map(|q| q.correlations.mean_x).collect();
    Ok(StationaryResult {
        beta: p.beta,
        switching_point: locate_switching(pump_ratios, &mean_x),
        points,
        hopf,
    })
}
