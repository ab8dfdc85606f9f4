//! Parallel trajectory ensembles with order-independent reductions.
//!
//! Trajectories run in blocks of one per lane; each block is integrated in
//! parallel and folded into the accumulators serially by trajectory index,
//! so results do not depend on the number of worker lanes.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{bonding_fixed_point, CavityState, PhysicalParams, PumpSchedule};
use crate::params_file::params_hash;
use crate::sde::{trajectory_rng, Diagnostics, Integrator, IntegratorConfig, SdeError, StreamRng};
use crate::stats::{MomentAccumulator, Obs, Sample, StatsError};

/// Environment variable holding the default lane count.
pub const LANES_ENV: &str = "NANODIMER_LANES";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
    #[error("{} trajectories failed, first: #{} ({})", .0.len(), .0[0].0, .0[0].1)]
    Trajectories(Vec<(u64, SdeError)>),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no lasing state at pump {0}")]
    BelowThreshold(f64),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for EnsembleError {
    fn from(e: std::io::Error) -> Self {
        EnsembleError::Io(e.to_string())
    }
}

/// Sign of the relative phase `Phi` for the phase-aligned start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseBranch {
    /// `Phi = 0`: in phase, bonding side.
    #[default]
    InPhase,
    /// `Phi = pi`: antibonding side.
    AntiPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Fixed-point intensity and carriers, photon maximum in cavity 1.
    PaperPhaseAligned { theta: f64, branch: PhaseBranch },
    FixedState { state: CavityState },
    /// Noiseless relaxation from a slightly tilted bonding state, then
    /// advanced to the next maximum of `|a1|^2`.
    RelaxedSteadyState { relax_time: f64 },
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::PaperPhaseAligned {
            theta: std::f64::consts::FRAC_PI_4,
            branch: PhaseBranch::InPhase,
        }
    }
}

/// Tilt away from the pure bonding state used to seed relaxation.
pub const RELAX_TILT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Keep every trajectory's sampled observables as well.
    FullSamples,
    #[default]
    MomentsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub init_policy: InitPolicy,
    pub reduction: Reduction,
    /// Worker threads; `0` uses [`default_lanes`].
    pub lanes: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: 100,
            master_seed: 0,
            init_policy: InitPolicy::default(),
            reduction: Reduction::MomentsOnly,
            lanes: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n_traj == 0 {
            return Err(EnsembleError::InvalidConfig("n_traj must be at least 1".into()));
        }
        Ok(())
    }
}

/// Master seed for sub-run `tag`, decorrelated from `master` by the
/// splitmix64 finalizer.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Lanes from [`LANES_ENV`], else the number of available cores.
pub fn default_lanes() -> usize {
    std::env::var(LANES_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs `f(index, rng)` for every trajectory index and returns the results
/// in index order, each with its own counter-based stream.
pub fn map_trajectories<T, F>(
    n_traj: usize,
    master_seed: u64,
    lanes: usize,
    f: F,
) -> Result<Vec<T>, EnsembleError>
where
    T: Send,
    F: Fn(u64, &mut StreamRng) -> Result<T, SdeError> + Sync,
{
    let mut out = Vec::with_capacity(n_traj);
    fold_trajectories(n_traj, master_seed, lanes, f, |_, v| out.push(v))?;
    Ok(out)
}

/// Like [`map_trajectories`] but hands each result to `fold` in index order
/// as soon as its block completes, keeping at most one block in memory.
pub fn fold_trajectories<T, F, G>(
    n_traj: usize,
    master_seed: u64,
    lanes: usize,
    f: F,
    mut fold: G,
) -> Result<(), EnsembleError>
where
    T: Send,
    F: Fn(u64, &mut StreamRng) -> Result<T, SdeError> + Sync,
    G: FnMut(u64, T),
{
    let lanes = if lanes == 0 { default_lanes() } else { lanes };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(lanes)
        .build()
        .map_err(|e| EnsembleError::InvalidConfig(e.to_string()))?;
    let mut failures = Vec::new();
    let mut start = 0u64;
    while start < n_traj as u64 {
        let end = (start + lanes as u64).min(n_traj as u64);
        let block: Vec<Result<T, SdeError>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| f(i, &mut trajectory_rng(master_seed, i)))
                .collect()
        });
        for (i, r) in (start..end).zip(block) {
            match r {
                Ok(v) => fold(i, v),
                Err(e) => failures.push((i, e)),
            }
        }
        start = end;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(EnsembleError::Trajectories(failures))
    }
}

/// Phase-aligned state on the lasing manifold: total intensity and carriers
/// of the bonding fixed point at `pump`, `I1 >= I2`.
pub fn phase_aligned_state(
    pump: f64,
    p: &PhysicalParams,
    theta: f64,
    branch: PhaseBranch,
) -> Result<CavityState, EnsembleError> {
    let fp = bonding_fixed_point(pump, p).ok_or(EnsembleError::BelowThreshold(pump))?;
    let theta = theta.clamp(0.0, std::f64::consts::FRAC_PI_2);
    let r = fp.total_intensity().sqrt();
    let a1 = Complex64::new(r * (0.5 * theta).cos(), 0.0);
    let sign = match branch {
        PhaseBranch::InPhase => 1.0,
        PhaseBranch::AntiPhase => -1.0,
    };
    let a2 = Complex64::new(sign * r * (0.5 * theta).sin(), 0.0);
    Ok(CavityState::new(a1, a2, fp.n1, fp.n2))
}

/// Noiseless relaxation at constant `pump` for `duration`, then forward to
/// the next local maximum of `|a1|^2` (at most two beat periods later).
pub fn relax(
    start: &CavityState,
    pump: f64,
    p: &PhysicalParams,
    duration: f64,
    dt: f64,
) -> Result<CavityState, EnsembleError> {
    let cfg = IntegratorConfig::noiseless(dt);
    let integ = Integrator::new(p, &cfg)?;
    let schedule = PumpSchedule::constant(pump, duration.max(dt)).map_err(SdeError::from)?;
    let mut rng = trajectory_rng(0, 0);
    let mut diag = Diagnostics::default();
    let mut s = if duration > 0.0 {
        integ.run(start, &schedule, integ.steps_for(duration), &mut rng, &mut diag, |_, _| {})?
    } else {
        *start
    };
    let limit = (2.0 * std::f64::consts::PI / p.k / dt).ceil() as usize + 2;
    let mut prev = s;
    let mut cur = integ.step(&s, pump, &mut rng, &mut diag)?;
    for _ in 0..limit {
        let next = integ.step(&cur, pump, &mut rng, &mut diag)?;
        if cur.intensity1() >= prev.intensity1() && cur.intensity1() >= next.intensity1() {
            s = cur;
            break;
        }
        prev = cur;
        cur = next;
        s = cur;
    }
    s.t = 0.0;
    Ok(s)
}

pub fn initial_condition(
    policy: &InitPolicy,
    p: &PhysicalParams,
    pump: f64,
    _rng: &mut StreamRng,
) -> Result<CavityState, EnsembleError> {
    match *policy {
        InitPolicy::FixedState { state } => Ok(state),
        InitPolicy::PaperPhaseAligned { theta, branch } => {
            phase_aligned_state(pump, p, theta, branch)
        }
        InitPolicy::RelaxedSteadyState { relax_time } => {
            let seed = phase_aligned_state(
                pump,
                p,
                std::f64::consts::FRAC_PI_2 - RELAX_TILT,
                PhaseBranch::InPhase,
            )?;
            relax(&seed, pump, p, relax_time, crate::sde::DEFAULT_DT)
        }
    }
}

/// Per-time reductions over the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub times: Vec<f64>,
    /// One accumulator per grid time, each with `n_traj` contributions
    /// unless a sample had vanishing intensity.
    pub moments: Vec<MomentAccumulator>,
    /// `samples[traj][time]` for [`Reduction::FullSamples`].
    pub samples: Option<Vec<Vec<Option<Sample>>>>,
    pub diagnostics: Diagnostics,
}

impl EnsembleResult {
    pub fn mean_trace(&self, o: Obs) -> Vec<f64> {
        self.moments.iter().map(|m| m.mean(o)).collect()
    }

    pub fn variance_trace(&self, o: Obs) -> Vec<f64> {
        self.moments.iter().map(|m| m.variance(o)).collect()
    }

    /// Columns `t` then `mean_<obs>,var_<obs>` for every observable.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "t")?;
        for o in Obs::ALL {
            write!(w, ",mean_{0},var_{0}", o.name())?;
        }
        writeln!(w, ",count")?;
        for (t, m) in self.times.iter().zip(&self.moments) {
            write!(w, "{t}")?;
            for o in Obs::ALL {
                write!(w, ",{},{}", m.mean(o), m.variance(o))?;
            }
            writeln!(w, ",{}", m.count)?;
        }
        Ok(())
    }

    pub fn summary_json(&self, p: &PhysicalParams, schedule: &PumpSchedule) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "params_hash": params_hash(p),
            "params": p,
            "schedule": schedule,
            "master_seed": self.config.master_seed,
            "grid_points": self.times.len(),
            "steps": self.diagnostics.steps,
            "clamp_count": self.diagnostics.clamp_count,
        })
    }
}

struct TrajectoryOutput {
    samples: Vec<Option<Sample>>,
    diagnostics: Diagnostics,
}

pub fn run_ensemble(
    cfg: &EnsembleConfig,
    schedule: &PumpSchedule,
    p: &PhysicalParams,
    icfg: &IntegratorConfig,
) -> Result<EnsembleResult, EnsembleError> {
    cfg.validate()?;
    schedule.validate().map_err(SdeError::from)?;
    let integ = Integrator::new(p, icfg)?;
    let steps = integ.steps_for(schedule.duration);
    let stride = icfg.record_stride as u64;
    let points = (steps / stride + 1) as usize;
    let mut ic_rng = trajectory_rng(cfg.master_seed, u64::MAX);
    let initial = initial_condition(&cfg.init_policy, p, schedule.pump_at(0.0), &mut ic_rng)?;
    let times: Vec<f64> = (0..points)
        .map(|k| initial.t + (k as u64 * stride) as f64 * icfg.dt)
        .collect();

    let mut moments = vec![MomentAccumulator::new(); points];
    let mut kept = match cfg.reduction {
        Reduction::FullSamples => Some(Vec::with_capacity(cfg.n_traj)),
        Reduction::MomentsOnly => None,
    };
    let mut diagnostics = Diagnostics::default();
    fold_trajectories(
        cfg.n_traj,
        cfg.master_seed,
        cfg.lanes,
        |_, rng| {
            let mut diag = Diagnostics::default();
            let mut samples = Vec::with_capacity(points);
            integ.run(&initial, schedule, steps, rng, &mut diag, |_, s| {
                samples.push(Sample::from_state(s));
            })?;
            Ok(TrajectoryOutput {
                samples,
                diagnostics: diag,
            })
        },
        |_, out| {
            for (acc, s) in moments.iter_mut().zip(&out.samples) {
                match s {
                    Some(s) => acc.push(s),
                    None => acc.degenerate += 1,
                }
            }
            diagnostics.merge(&out.diagnostics);
            if let Some(k) = kept.as_mut() {
                k.push(out.samples);
            }
        },
    )?;
    Ok(EnsembleResult {
        config: *cfg,
        times,
        moments,
        samples: kept,
        diagnostics,
    })
}

/// Beat periods per demodulation block.
pub const ENVELOPE_BLOCK_PERIODS: usize = 4;
/// Minimum trace length in beat periods.
pub const ENVELOPE_MIN_PERIODS: f64 = 20.0;
/// Envelope blocks below this fraction of the first are treated as noise floor.
pub const ENVELOPE_FLOOR: f64 = 0.05;
/// RMS log-residual above which the exponential fit is rejected.
pub const ENVELOPE_MAX_RESIDUAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Decay rate of the beat envelope (1/ns); 0 when not significant.
    pub rate: f64,
    pub rate_stderr: f64,
    pub initial_amplitude: f64,
    pub blocks_used: usize,
    pub rms_residual: f64,
}

/// Fits `A exp(-rate t)` to the envelope of the `2K` beat in a uniformly
/// sampled `mean_trace`, by complex demodulation over blocks of whole periods.
pub fn envelope_decay(times: &[f64], mean_trace: &[f64], k: f64) -> Result<EnvelopeFit, StatsError> {
    if times.len() != mean_trace.len() {
        return Err(StatsError::LengthMismatch(times.len(), mean_trace.len()));
    }
    if times.len() < 3 {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    let period = std::f64::consts::PI / k;
    let span = times[times.len() - 1] - times[0];
    if !(dt > 0.0) || span < ENVELOPE_MIN_PERIODS * period {
        return Err(StatsError::InsufficientLength(times.len()));
    }
    let omega = 2.0 * k;
    let per_block = ((ENVELOPE_BLOCK_PERIODS as f64 * period / dt).round() as usize).max(2);
    let mut centers = Vec::new();
    let mut env = Vec::new();
    for (tb, yb) in times.chunks_exact(per_block).zip(mean_trace.chunks_exact(per_block)) {
        let mean = yb.iter().sum::<f64>() / per_block as f64;
        let z: Complex64 = tb
            .iter()
            .zip(yb)
            .map(|(&t, &y)| (y - mean) * Complex64::from_polar(1.0, -omega * t))
            .sum();
        env.push(2.0 * z.norm() / per_block as f64);
        centers.push(0.5 * (tb[0] + tb[per_block - 1]));
    }
    if env.len() < 3 || !(env[0] > 0.0) {
        return Err(StatsError::FitFailure("no beat signal in trace".into()));
    }
    let floor = ENVELOPE_FLOOR * env[0];
    let used = env.iter().take_while(|&&e| e > floor).count();
    if used < 3 {
        return Err(StatsError::FitFailure(format!(
            "envelope reaches the noise floor after {used} blocks"
        )));
    }
    let xs = &centers[..used];
    let ys: Vec<f64> = env[..used].iter().map(|e| e.ln()).collect();
    let n = used as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let rms = (sse / n).sqrt();
    if rms > ENVELOPE_MAX_RESIDUAL {
        return Err(StatsError::FitFailure(format!("rms log residual {rms:.3}")));
    }
    let stderr = if used > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let significant = -slope > 3.0 * stderr;
    Ok(EnvelopeFit {
        rate: if significant { -slope } else { 0.0 },
        rate_stderr: stderr,
        initial_amplitude: intercept.exp(),
        blocks_used: used,
        rms_residual: rms,
    })
}
