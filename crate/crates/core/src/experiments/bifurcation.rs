use serde::{Deserialize, Serialize};

use super::{check_monotone, opt, ExperimentError, SweepResult};
use crate::ensemble::{phase_aligned_state, PhaseBranch};
use crate::model::{mode_imbalance, transparency_pump, CavityState, PhysicalParams, PumpSchedule};
use crate::sde::{trajectory_rng, Diagnostics, Integrator, IntegratorConfig, DEFAULT_DT};

/// Pump ratios of the noiseless Bloch-sphere orbits.
pub const FIGURE_PUMPS: [f64; 9] = [
    6.008, 6.010, 6.012, 6.016, 6.020, 6.024, 6.028, 6.032, 6.036,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub dt: f64,
    /// Length of one convergence chunk (ns).
    pub chunk: f64,
    /// Integration time before convergence is tested (ns).
    pub min_time: f64,
    pub max_time: f64,
    /// Largest chunk-to-chunk change of contrast swing and mean `x` accepted
    /// as converged.
    pub tolerance: f64,
    /// Angle by which a fresh start leaves the pure bonding state.
    pub tilt: f64,
    /// Peak-to-peak swing of `I1 / I_tot` separating limit cycles from fixed points.
    pub cycle_threshold: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            chunk: 50.0,
            min_time: 100.0,
            max_time: 6000.0,
            tolerance: 2e-5,
            tilt: 0.01,
            cycle_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attractor {
    /// Pump below the bonding-mode threshold.
    Off,
    BondingFixedPoint,
    AntibondingFixedPoint,
    LimitCycle,
}

impl Attractor {
    pub fn label(self) -> &'static str {
        match self {
            Attractor::Off => "off",
            Attractor::BondingFixedPoint => "B",
            Attractor::AntibondingFixedPoint => "A",
            Attractor::LimitCycle => "cycle",
        }
    }

    fn code(self) -> f64 {
        match self {
            Attractor::Off => 0.0,
            Attractor::BondingFixedPoint => 1.0,
            Attractor::LimitCycle => 2.0,
            Attractor::AntibondingFixedPoint => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub pump_ratio: f64,
    pub attractor: Attractor,
    pub mean_x: f64,
    /// Mean of `sqrt(1 - x^2)` over the last chunk.
    pub amplitude: f64,
    /// Peak-to-peak of `I1 / I_tot` over the last chunk.
    pub contrast_swing: f64,
    /// Beat period of `I1` (ns), for limit cycles.
    pub period: Option<f64>,
    pub mean_i_tot: f64,
    pub converged: bool,
    pub time: f64,
    pub final_state: CavityState,
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkStats {
    mean_x: f64,
    amplitude: f64,
    swing: f64,
    mean_i_tot: f64,
    period: Option<f64>,
}

fn chunk_stats(states: &[(f64, CavityState)]) -> ChunkStats {
    let n = states.len() as f64;
    let (mut sx, mut sa, mut si, mut s1) = (0.0, 0.0, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, s) in states {
        let tot = s.total_intensity();
        if let Ok((x, _, _)) = mode_imbalance(s.a1, s.a2) {
            sx += x;
            sa += (1.0 - x * x).max(0.0).sqrt();
        }
        let c = if tot > 0.0 { s.intensity1() / tot } else { 0.5 };
        lo = lo.min(c);
        hi = hi.max(c);
        si += tot;
        s1 += s.intensity1();
    }
    let m1 = s1 / n;
    let mut crossings = Vec::new();
    for w in states.windows(2) {
        let (y0, y1) = (w[0].1.intensity1() - m1, w[1].1.intensity1() - m1);
        if y0 < 0.0 && y1 >= 0.0 {
            crossings.push(w[0].0 + (w[1].0 - w[0].0) * (-y0) / (y1 - y0));
        }
    }
    let period = (crossings.len() >= 2).then(|| {
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
    });
    ChunkStats {
        mean_x: sx / n,
        amplitude: sa / n,
        swing: hi - lo,
        mean_i_tot: si / n,
        period,
    }
}

/// Integrates the noiseless equations at `pump_ratio` from `start` until the
/// chunk statistics settle, then classifies the attractor.
pub fn settle(
    p: &PhysicalParams,
    pump_ratio: f64,
    start: &CavityState,
    settings: &ScanSettings,
) -> Result<BifurcationPoint, ExperimentError> {
    let pump = pump_ratio * transparency_pump(p);
    let integ = Integrator::new(p, &IntegratorConfig::noiseless(settings.dt))?;
    let schedule = PumpSchedule::constant(pump, settings.chunk)?;
    let steps = integ.steps_for(settings.chunk);
    let mut rng = trajectory_rng(0, 0);
    let mut diag = Diagnostics::default();
    let mut s = CavityState { t: 0.0, ..*start };
    let mut buf = Vec::with_capacity(steps as usize + 1);
    let mut prev: Option<ChunkStats> = None;
    let mut calm = 0;
    let mut elapsed = 0.0;
    let mut stats;
    loop {
        buf.clear();
        s = integ.run(&s, &schedule, steps, &mut rng, &mut diag, |_, st| buf.push((st.t, *st)))?;
        elapsed += settings.chunk;
        stats = chunk_stats(&buf);
        if let Some(pr) = prev {
            let quiet = (stats.swing - pr.swing).abs() < settings.tolerance
                && (stats.mean_x - pr.mean_x).abs() < settings.tolerance;
            calm = if quiet { calm + 1 } else { 0 };
        }
        prev = Some(stats);
        if elapsed >= settings.min_time && calm >= 2 {
            break;
        }
        if elapsed >= settings.max_time {
            break;
        }
    }
    let converged = calm >= 2;
    let attractor = if stats.swing > settings.cycle_threshold {
        Attractor::LimitCycle
    } else if stats.mean_x >= 0.0 {
        Attractor::BondingFixedPoint
    } else {
        Attractor::AntibondingFixedPoint
    };
    Ok(BifurcationPoint {
        pump_ratio,
        attractor,
        mean_x: stats.mean_x,
        amplitude: stats.amplitude,
        contrast_swing: stats.swing,
        period: if attractor == Attractor::LimitCycle {
            stats.period
        } else {
            None
        },
        mean_i_tot: stats.mean_i_tot,
        converged,
        time: elapsed,
        final_state: CavityState { t: 0.0, ..s },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationResult {
    pub points: Vec<BifurcationPoint>,
    /// Estimated Hopf pumps at the lower and upper ends of the cycle window.
    pub hopf: [Option<f64>; 2],
}

impl BifurcationResult {
    pub fn to_sweep(&self) -> Result<SweepResult, ExperimentError> {
        let rows = self
            .points
            .iter()
            .map(|b| {
                vec![
                    b.pump_ratio,
                    b.attractor.code(),
                    b.mean_x,
                    b.amplitude,
                    b.contrast_swing,
                    opt(b.period),
                    b.mean_i_tot,
                    if b.converged { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        SweepResult::new(
            "1b",
            "P/P0",
            &[
                "attractor",
                "mean_x",
                "amplitude",
                "contrast_swing",
                "period_ns",
                "mean_I_tot",
                "converged",
            ],
            rows,
            serde_json::json!({
                "attractor_codes": {"0": "off", "1": "B", "2": "cycle", "3": "A"},
                "hopf": self.hopf,
                "labels": self.points.iter().map(|b| b.attractor.label()).collect::<Vec<_>>(),
            }),
        )
    }
}

/// Hopf estimate from the cycle point next to a fixed point: the swing of a
/// supercritical cycle grows like the square root of the distance, so the
/// squared swing is extrapolated linearly to zero; falls back to the midpoint.
fn hopf_between(inner: &BifurcationPoint, next: Option<&BifurcationPoint>, outer: &BifurcationPoint) -> f64 {
    let mid = 0.5 * (inner.pump_ratio + outer.pump_ratio);
    let Some(next) = next.filter(|n| n.attractor == Attractor::LimitCycle) else {
        return mid;
    };
    let (s0, s1) = (inner.contrast_swing.powi(2), next.contrast_swing.powi(2));
    if s1 <= s0 {
        return mid;
    }
    let p = inner.pump_ratio - s0 * (next.pump_ratio - inner.pump_ratio) / (s1 - s0);
    let (lo, hi) = if inner.pump_ratio < outer.pump_ratio {
        (inner.pump_ratio, outer.pump_ratio)
    } else {
        (outer.pump_ratio, inner.pump_ratio)
    };
    if (lo..=hi).contains(&p) {
        p
    } else {
        mid
    }
}

/// Noiseless continuation along increasing pump. Each point starts from the
/// previous attractor; after a fixed point (or below threshold) it restarts
/// from the bonding state tilted by `settings.tilt`.
pub fn bifurcation_scan(
    pump_ratios: &[f64],
    p: &PhysicalParams,
    settings: &ScanSettings,
) -> Result<BifurcationResult, ExperimentError> {
    check_monotone(pump_ratios, "pump")?;
    let mut points: Vec<BifurcationPoint> = Vec::with_capacity(pump_ratios.len());
    for &r in pump_ratios {
        let pump = r * transparency_pump(p);
        let warm = points
            .last()
            .filter(|b| b.attractor == Attractor::LimitCycle)
            .map(|b| b.final_state);
        let start = match warm {
            Some(s) => s,
            None => match phase_aligned_state(
                pump,
                p,
                std::f64::consts::FRAC_PI_2 - settings.tilt,
                PhaseBranch::InPhase,
            ) {
                Ok(s) => s,
                Err(_) => {
                    let n = pump / p.gamma_tot;
                    points.push(BifurcationPoint {
                        pump_ratio: r,
                        attractor: Attractor::Off,
                        mean_x: f64::NAN,
                        amplitude: 0.0,
                        contrast_swing: 0.0,
                        period: None,
                        mean_i_tot: 0.0,
                        converged: true,
                        time: 0.0,
                        final_state: CavityState::new(Default::default(), Default::default(), n, n),
                    });
                    continue;
                }
            },
        };
        points.push(settle(p, r, &start, settings)?);
    }
    let mut hopf = [None, None];
    for i in 0..points.len() {
        if points[i].attractor != Attractor::LimitCycle {
            continue;
        }
        if hopf[0].is_none() && i > 0 && points[i - 1].attractor == Attractor::BondingFixedPoint {
            hopf[0] = Some(hopf_between(&points[i], points.get(i + 1), &points[i - 1]));
        }
        if i + 1 < points.len() && points[i + 1].attractor == Attractor::AntibondingFixedPoint {
            let prev = if i > 0 { points.get(i - 1) } else { None };
            hopf[1] = Some(hopf_between(&points[i], prev, &points[i + 1]));
        }
    }
    Ok(BifurcationResult { points, hopf })
}
