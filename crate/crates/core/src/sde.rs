//! Stochastic integration of the coupled rate equations.
//!
//! The field noise is complex white noise with `<F F*> = R_sp delta(t - t')`
//! and `<F F> = 0`, evaluated with the carrier number at the start of each
//! step (Ito). Carriers carry no Langevin term.
//!
//! Two drift schemes share the same noise increment:
//!
//! * [`Scheme::ExponentialRk4`] (default) propagates the constant linear part
//!   (loss, coupling, and the gain/phase rotation at the bonding clamp)
//!   exactly and advances the remainder with a Lawson RK4 step. The fast
//!   `~2.6e3 rad/ns` rotation never enters the RK stages, so the Hopf window
//!   survives at practical step sizes.
//! * [`Scheme::EulerMaruyama`] is the plain explicit update, kept for
//!   convergence checks at very small steps.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    gain, modal_frame, spontaneous_rate, CavityState, ModalFrame, ModelError, PhysicalParams,
    PumpSchedule,
};
use crate::params_file::params_hash;

/// Default step (ns).
pub const DEFAULT_DT: f64 = 1e-4;

/// Upper bound on `kappa * dt` unless explicitly overridden.
pub const MAX_KAPPA_DT: f64 = 0.1;

/// Per-trajectory random stream.
pub type StreamRng = ChaCha8Rng;

/// Counter-based stream for trajectory `index` under `master_seed`.
///
/// Streams depend only on `(master_seed, index)`, never on scheduling.
pub fn trajectory_rng(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("non-finite state at t = {t} ns")]
    NonFinite { t: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SdeError {
    fn from(e: std::io::Error) -> Self {
        SdeError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    ExponentialRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step (ns).
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Keep one sample every `record_stride` steps.
    pub record_stride: usize,
    /// `false` forces `R_sp = 0`: a deterministic ODE solve.
    pub noise: bool,
    /// Lifts the `kappa * dt <= 0.1` guard.
    pub allow_coarse_step: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            scheme: Scheme::default(),
            seed: 0,
            record_stride: 1,
            noise: true,
            allow_coarse_step: false,
        }
    }
}

impl IntegratorConfig {
    pub fn noiseless(dt: f64) -> Self {
        Self {
            dt,
            noise: false,
            ..Self::default()
        }
    }

    pub fn validate(&self, p: &PhysicalParams) -> Result<(), SdeError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SdeError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.allow_coarse_step && self.dt * p.kappa > MAX_KAPPA_DT {
            return Err(SdeError::InvalidConfig(format!(
                "kappa*dt = {:.3} exceeds {MAX_KAPPA_DT}",
                self.dt * p.kappa
            )));
        }
        if self.record_stride == 0 {
            return Err(SdeError::InvalidConfig("record_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Counters accumulated while integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    /// Steps on which a carrier number was clamped at zero.
    pub clamp_count: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.clamp_count += other.clamp_count;
    }
}

/// Spontaneous-emission increments `(dW1, dW2)` for a step of length `dt`.
///
/// `dW_i = sqrt(R_sp(n_i) dt / 2) (xi_re + i xi_im)`, four standard normals
/// drawn in the order re1, im1, re2, im2.
pub fn noise_increment<R: Rng + ?Sized>(
    s: &CavityState,
    dt: f64,
    p: &PhysicalParams,
    rng: &mut R,
) -> (Complex64, Complex64) {
    let s1 = (spontaneous_rate(s.n1, p) * dt * 0.5).sqrt();
    let s2 = (spontaneous_rate(s.n2, p) * dt * 0.5).sqrt();
    let x1: f64 = rng.sample(StandardNormal);
    let y1: f64 = rng.sample(StandardNormal);
    let x2: f64 = rng.sample(StandardNormal);
    let y2: f64 = rng.sample(StandardNormal);
    (Complex64::new(s1 * x1, s1 * y1), Complex64::new(s2 * x2, s2 * y2))
}

/// Symmetric 2x2 propagator `[[d, o], [o, d]]` of the constant linear part.
#[derive(Debug, Clone, Copy)]
struct Propagator {
    diag: Complex64,
    off: Complex64,
}

impl Propagator {
    fn new(p: &PhysicalParams, g_ref: f64, h: f64) -> Self {
        let common = Complex64::new(0.5 * g_ref - p.kappa, 0.5 * p.alpha * g_ref) * h;
        let coupling = Complex64::new(p.gamma_c, p.k) * h;
        let e = common.exp();
        Self {
            diag: e * coupling.cosh(),
            off: e * coupling.sinh(),
        }
    }

    #[inline]
    fn apply(&self, a1: Complex64, a2: Complex64) -> (Complex64, Complex64) {
        (
            self.diag * a1 + self.off * a2,
            self.off * a1 + self.diag * a2,
        )
    }
}

#[derive(Clone, Copy)]
struct Stage {
    a1: Complex64,
    a2: Complex64,
    n1: f64,
    n2: f64,
}

/// Stepper bound to one parameter set and configuration.
///
/// Holds no random state; callers own their streams, so one `Integrator`
/// can drive any number of trajectories.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: PhysicalParams,
    cfg: IntegratorConfig,
    g_ref: f64,
    half: Propagator,
}

impl Integrator {
    pub fn new(params: &PhysicalParams, cfg: &IntegratorConfig) -> Result<Self, SdeError> {
        params.validate()?;
        cfg.validate(params)?;
        let g_ref = params.bonding_threshold_gain();
        Ok(Self {
            params: *params,
            cfg: *cfg,
            g_ref,
            half: Propagator::new(params, g_ref, 0.5 * cfg.dt),
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Remainder of the drift once the propagated linear part is removed.
    #[inline]
    fn residual(&self, s: &Stage, pump: f64) -> Stage {
        let p = &self.params;
        let g1 = gain(s.n1, p);
        let g2 = gain(s.n2, p);
        let half_alpha = Complex64::new(0.5, 0.5 * p.alpha);
        Stage {
            a1: half_alpha * (g1 - self.g_ref) * s.a1,
            a2: half_alpha * (g2 - self.g_ref) * s.a2,
            n1: pump - p.gamma_tot * s.n1 - g1 * s.a1.norm_sqr(),
            n2: pump - p.gamma_tot * s.n2 - g2 * s.a2.norm_sqr(),
        }
    }

    fn drift_update(&self, s: &CavityState, pump: f64) -> Stage {
        let dt = self.cfg.dt;
        match self.cfg.scheme {
            Scheme::EulerMaruyama => {
                let d = crate::model::drift(s, pump, &self.params);
                Stage {
                    a1: s.a1 + d.da1 * dt,
                    a2: s.a2 + d.da2 * dt,
                    n1: s.n1 + d.dn1 * dt,
                    n2: s.n2 + d.dn2 * dt,
                }
            }
            Scheme::ExponentialRk4 => {
                let e = &self.half;
                let h = 0.5 * dt;
                let u = Stage {
                    a1: s.a1,
                    a2: s.a2,
                    n1: s.n1,
                    n2: s.n2,
                };
                let k1 = self.residual(&u, pump);
                let (eu1, eu2) = e.apply(u.a1, u.a2);
                let (ek1_1, ek1_2) = e.apply(k1.a1, k1.a2);
                let k2 = self.residual(
                    &Stage {
                        a1: eu1 + ek1_1 * h,
                        a2: eu2 + ek1_2 * h,
                        n1: u.n1 + k1.n1 * h,
                        n2: u.n2 + k1.n2 * h,
                    },
                    pump,
                );
                let k3 = self.residual(
                    &Stage {
                        a1: eu1 + k2.a1 * h,
                        a2: eu2 + k2.a2 * h,
                        n1: u.n1 + k2.n1 * h,
                        n2: u.n2 + k2.n2 * h,
                    },
                    pump,
                );
                let (eeu1, eeu2) = e.apply(eu1, eu2);
                let (ek3_1, ek3_2) = e.apply(k3.a1, k3.a2);
                let k4 = self.residual(
                    &Stage {
                        a1: eeu1 + ek3_1 * dt,
                        a2: eeu2 + ek3_2 * dt,
                        n1: u.n1 + k3.n1 * dt,
                        n2: u.n2 + k3.n2 * dt,
                    },
                    pump,
                );
                let (eek1_1, eek1_2) = e.apply(ek1_1, ek1_2);
                let (ek2_1, ek2_2) = e.apply(k2.a1, k2.a2);
                let w = dt / 6.0;
                Stage {
                    a1: eeu1 + (eek1_1 + (ek2_1 + ek3_1) * 2.0 + k4.a1) * w,
                    a2: eeu2 + (eek1_2 + (ek2_2 + ek3_2) * 2.0 + k4.a2) * w,
                    n1: u.n1 + (k1.n1 + 2.0 * (k2.n1 + k3.n1) + k4.n1) * w,
                    n2: u.n2 + (k1.n2 + 2.0 * (k2.n2 + k3.n2) + k4.n2) * w,
                }
            }
        }
    }

    /// Advances `s` by one step at constant `pump`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        s: &CavityState,
        pump: f64,
        rng: &mut R,
        diag: &mut Diagnostics,
    ) -> Result<CavityState, SdeError> {
        let (dw1, dw2) = if self.cfg.noise {
            noise_increment(s, self.cfg.dt, &self.params, rng)
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        };
        self.step_with_increments(s, pump, dw1, dw2, diag)
    }

    /// One step with caller-supplied field increments, ignoring `cfg.noise`.
    pub fn step_with_increments(
        &self,
        s: &CavityState,
        pump: f64,
        dw1: Complex64,
        dw2: Complex64,
        diag: &mut Diagnostics,
    ) -> Result<CavityState, SdeError> {
        let d = self.drift_update(s, pump);
        let mut next = CavityState {
            a1: d.a1 + dw1,
            a2: d.a2 + dw2,
            n1: d.n1,
            n2: d.n2,
            t: s.t + self.cfg.dt,
        };
        diag.steps += 1;
        if next.n1 < 0.0 || next.n2 < 0.0 {
            next.n1 = next.n1.max(0.0);
            next.n2 = next.n2.max(0.0);
            diag.clamp_count += 1;
        }
        if !next.is_finite() {
            return Err(SdeError::NonFinite { t: next.t });
        }
        Ok(next)
    }

    /// Number of steps covering `duration`.
    pub fn steps_for(&self, duration: f64) -> u64 {
        ((duration / self.cfg.dt).round() as u64).max(1)
    }

    /// Integrates `steps` steps under `schedule`, calling `observe(k, state)`
    /// for `k = 0` and every `record_stride`-th step. Sample times are
    /// `initial.t + k dt` exactly. Returns the final state.
    pub fn run<R, F>(
        &self,
        initial: &CavityState,
        schedule: &PumpSchedule,
        steps: u64,
        rng: &mut R,
        diag: &mut Diagnostics,
        mut observe: F,
    ) -> Result<CavityState, SdeError>
    where
        R: Rng + ?Sized,
        F: FnMut(u64, &CavityState),
    {
        let stride = self.cfg.record_stride as u64;
        let dt = self.cfg.dt;
        let t0 = initial.t;
        let mut s = *initial;
        observe(0, &s);
        for k in 1..=steps {
            let pump = schedule.pump_at((k - 1) as f64 * dt);
            s = self.step(&s, pump, rng, diag)?;
            s.t = t0 + k as f64 * dt;
            if k % stride == 0 {
                observe(k, &s);
            }
        }
        Ok(s)
    }
}

/// One step from a freshly built integrator.
pub fn step<R: Rng + ?Sized>(
    s: &CavityState,
    pump: f64,
    p: &PhysicalParams,
    cfg: &IntegratorConfig,
    rng: &mut R,
) -> Result<CavityState, SdeError> {
    let mut diag = Diagnostics::default();
    Integrator::new(p, cfg)?.step(s, pump, rng, &mut diag)
}

/// Sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<CavityState>,
    /// `None` where the total intensity vanishes.
    pub frames: Vec<Option<ModalFrame>>,
    pub diagnostics: Diagnostics,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes the samples as CSV, skipping the first `skip` rows.
    ///
    /// Header lines start with `#` and carry the parameter hash and seed;
    /// the column row is `t,re_a1,im_a1,re_a2,im_a2,n1,n2`.
    pub fn write_csv<W: Write>(
        &self,
        w: &mut W,
        params: &PhysicalParams,
        cfg: &IntegratorConfig,
        skip: usize,
    ) -> std::io::Result<()> {
        writeln!(w, "# nanodimer trajectory v1")?;
        writeln!(
            w,
            "# params_hash={} seed={} dt={} record_stride={} noise={}",
            params_hash(params),
            cfg.seed,
            cfg.dt,
            cfg.record_stride,
            cfg.noise
        )?;
        writeln!(w, "t,re_a1,im_a1,re_a2,im_a2,n1,n2")?;
        for s in self.states.iter().skip(skip) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.t, s.a1.re, s.a1.im, s.a2.re, s.a2.im, s.n1, s.n2
            )?;
        }
        Ok(())
    }
}

/// Integrates `initial` over `schedule.duration`, sampling every
/// `record_stride` steps (the initial state is the first sample).
pub fn integrate<R: Rng + ?Sized>(
    initial: &CavityState,
    schedule: &PumpSchedule,
    p: &PhysicalParams,
    cfg: &IntegratorConfig,
    rng: &mut R,
) -> Result<TrajectoryRecord, SdeError> {
    schedule.validate()?;
    if schedule.duration < cfg.dt * (1.0 - 1e-9) {
        return Err(SdeError::InvalidConfig(format!(
            "schedule duration {} shorter than dt {}",
            schedule.duration, cfg.dt
        )));
    }
    let integrator = Integrator::new(p, cfg)?;
    let steps = integrator.steps_for(schedule.duration);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut diag = Diagnostics::default();
    integrator.run(initial, schedule, steps, rng, &mut diag, |_, s| {
        times.push(s.t);
        states.push(*s);
    })?;
    let frames = states.iter().map(|s| modal_frame(s).ok()).collect();
    Ok(TrajectoryRecord {
        times,
        states,
        frames,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bonding_fixed_point, transparency_pump};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_rate_gives_zero_increment() {
        let p = PhysicalParams::nanolaser();
        let s = CavityState::new(c(1.0, 0.0), c(0.0, 1.0), 0.0, 0.0);
        let mut rng = trajectory_rng(1, 0);
        let (d1, d2) = noise_increment(&s, 1e-4, &p, &mut rng);
        assert_eq!(d1, c(0.0, 0.0));
        assert_eq!(d2, c(0.0, 0.0));
    }

    #[test]
    fn noise_moments_match_diffusion() {
        // Monte-Carlo moment oracle on 1e6 draws at fixed carrier numbers.
        let p = PhysicalParams::nanolaser();
        let s = CavityState::new(c(0.0, 0.0), c(0.0, 0.0), 2.3e4, 1.7e4);
        let dt = 1e-4;
        let r1 = spontaneous_rate(s.n1, &p) * dt;
        let r2 = spontaneous_rate(s.n2, &p) * dt;
        let mut rng = trajectory_rng(42, 3);
        let n = 1_000_000;
        let (mut abs1, mut abs2) = (0.0, 0.0);
        let (mut sq1, mut m1, mut cross) = (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        for _ in 0..n {
            let (d1, d2) = noise_increment(&s, dt, &p, &mut rng);
            abs1 += d1.norm_sqr();
            abs2 += d2.norm_sqr();
            sq1 += d1 * d1;
            m1 += d1;
            cross += d1 * d2.conj();
        }
        let nf = n as f64;
        assert!((abs1 / nf / r1 - 1.0).abs() < 0.01);
        assert!((abs2 / nf / r2 - 1.0).abs() < 0.01);
        assert!((sq1 / nf).norm() / r1 <= 3.0 / nf.sqrt());
        assert!((m1 / nf).norm() / r1.sqrt() <= 3.0 / nf.sqrt());
        assert!((cross / nf).norm() / (r1 * r2).sqrt() <= 3.0 / nf.sqrt());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let p = PhysicalParams::nanolaser();
        let s = CavityState::new(c(0.0, 0.0), c(0.0, 0.0), 2e4, 2e4);
        let draw = |seed, idx| {
            let mut rng = trajectory_rng(seed, idx);
            (0..16)
                .map(|_| noise_increment(&s, 1e-4, &p, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 2), draw(7, 2));
        assert_ne!(draw(7, 2), draw(7, 3));
        assert_ne!(draw(7, 2), draw(8, 2));
    }

    #[test]
    fn config_guards() {
        let p = PhysicalParams::nanolaser();
        let mut cfg = IntegratorConfig::default();
        assert!(cfg.validate(&p).is_ok());
        cfg.dt = 1e-3;
        assert!(cfg.validate(&p).is_err());
        cfg.allow_coarse_step = true;
        assert!(cfg.validate(&p).is_ok());
        cfg.record_stride = 0;
        assert!(cfg.validate(&p).is_err());
        cfg.record_stride = 1;
        cfg.dt = -1.0;
        assert!(cfg.validate(&p).is_err());
    }

    #[test]
    fn below_threshold_fixed_point_is_exact() {
        let p = PhysicalParams::nanolaser();
        let pump = 3.0e4;
        let n = pump / p.gamma_tot;
        let s = CavityState::new(c(0.0, 0.0), c(0.0, 0.0), n, n);
        for scheme in [Scheme::EulerMaruyama, Scheme::ExponentialRk4] {
            let cfg = IntegratorConfig {
                scheme,
                ..IntegratorConfig::noiseless(1e-4)
            };
            let mut rng = trajectory_rng(0, 0);
            let next = step(&s, pump, &p, &cfg, &mut rng).unwrap();
            assert_eq!(next.a1, c(0.0, 0.0));
            assert!((next.n1 - n).abs() <= 1e-9 * n);
        }
    }

    #[test]
    fn bonding_fixed_point_stays_put() {
        let p = PhysicalParams::nanolaser();
        let pump = 5.0 * transparency_pump(&p);
        let s = bonding_fixed_point(pump, &p).unwrap();
        let cfg = IntegratorConfig::noiseless(1e-4);
        let mut rng = trajectory_rng(0, 0);
        let rec = integrate(&s, &PumpSchedule::constant(pump, 1.0).unwrap(), &p, &cfg, &mut rng)
            .unwrap();
        let last = rec.states.last().unwrap();
        assert!((last.total_intensity() / s.total_intensity() - 1.0).abs() < 1e-8);
        assert!((last.n1 / s.n1 - 1.0).abs() < 1e-10);
        assert!((rec.frames.last().unwrap().unwrap().x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_gives_two_samples() {
        let p = PhysicalParams::nanolaser();
        let cfg = IntegratorConfig::default();
        let s = CavityState::new(c(1.0, 0.0), c(1.0, 0.0), 2e4, 2e4);
        let mut rng = trajectory_rng(0, 0);
        let sched = PumpSchedule::constant(1e5, cfg.dt).unwrap();
        let rec = integrate(&s, &sched, &p, &cfg, &mut rng).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.times, vec![0.0, cfg.dt]);
        let short = PumpSchedule::constant(1e5, cfg.dt / 2.0).unwrap();
        assert!(integrate(&s, &short, &p, &cfg, &mut rng).is_err());
    }

    #[test]
    fn time_grid_spacing() {
        let p = PhysicalParams::nanolaser();
        let cfg = IntegratorConfig {
            record_stride: 7,
            ..IntegratorConfig::default()
        };
        let s = CavityState::new(c(1.0, 0.0), c(1.0, 0.0), 2e4, 2e4);
        let mut rng = trajectory_rng(0, 0);
        let sched = PumpSchedule::constant(1e5, 0.0701).unwrap();
        let rec = integrate(&s, &sched, &p, &cfg, &mut rng).unwrap();
        assert_eq!(rec.len(), 701 / 7 + 1);
        for w in rec.times.windows(2) {
            assert!((w[1] - w[0] - 7.0 * cfg.dt).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_counts_negative_carriers() {
        let p = PhysicalParams::nanolaser();
        let cfg = IntegratorConfig {
            scheme: Scheme::EulerMaruyama,
            ..IntegratorConfig::noiseless(1e-4)
        };
        // Huge field depletes carriers past zero in one explicit step.
        let s = CavityState::new(c(3e3, 0.0), c(3e3, 0.0), 2e4, 2e4);
        let integ = Integrator::new(&p, &cfg).unwrap();
        let mut diag = Diagnostics::default();
        let mut rng = trajectory_rng(0, 0);
        let next = integ.step(&s, 0.0, &mut rng, &mut diag).unwrap();
        assert_eq!(next.n1, 0.0);
        assert_eq!(diag.clamp_count, 1);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let p = PhysicalParams::nanolaser();
        let cfg = IntegratorConfig::noiseless(1e-4);
        let s = CavityState::new(c(f64::INFINITY, 0.0), c(0.0, 0.0), 2e4, 2e4);
        let mut rng = trajectory_rng(0, 0);
        match step(&s, 1e5, &p, &cfg, &mut rng) {
            Err(SdeError::NonFinite { t }) => assert!((t - 1e-4).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let p = PhysicalParams::nanolaser();
        let cfg = IntegratorConfig::default();
        let s = CavityState::new(c(1.0, 0.5), c(1.0, 0.0), 2e4, 2e4);
        let mut rng = trajectory_rng(0, 0);
        let rec = integrate(&s, &PumpSchedule::constant(1e5, 3e-4).unwrap(), &p, &cfg, &mut rng)
            .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, &p, &cfg, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[1].contains("params_hash=") && lines[1].contains("seed=0"));
        assert_eq!(lines[2], "t,re_a1,im_a1,re_a2,im_a2,n1,n2");
        assert_eq!(lines.len(), 3 + 4);
        assert_eq!(lines[3].split(',').count(), 7);
    }
}
