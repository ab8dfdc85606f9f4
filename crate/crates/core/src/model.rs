//! Coupled-cavity rate equations: parameters, state, and closed-form maps.
//!
//! Units: time in ns, rates in GHz (1/ns), photon and carrier numbers as
//! dimensionless counts. `B_rec` is in cm^3/s and `V_a` in cm^3; the
//! spontaneous rate is converted to 1/ns internally.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Carrier density at transparency used by the co-scaled parameter sets (cm^-3).
pub const TRANSPARENCY_DENSITY: f64 = 1e18;

/// Tolerance applied to `|x| <= 1` before rejecting an imbalance.
pub const IMBALANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("total intensity is zero, modal imbalance undefined")]
    DegenerateIntensity,
    #[error("imbalance {0} lies outside [-1, 1]")]
    ImbalanceOutOfRange(f64),
    #[error("pump schedule: {0}")]
    InvalidSchedule(String),
}

/// Rate-equation constants plus the spontaneous-emission noise constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Cavity loss rate (GHz).
    pub kappa: f64,
    /// Henry linewidth-enhancement factor.
    pub alpha: f64,
    /// Coupling frequency splitting K (GHz).
    pub k: f64,
    /// Coupling loss splitting (GHz).
    pub gamma_c: f64,
    /// Two-level radiative recombination rate (GHz).
    pub gamma_par: f64,
    /// Total carrier recombination rate (GHz).
    pub gamma_tot: f64,
    /// Spontaneous emission factor, `0 < beta <= 1`.
    pub beta: f64,
    /// Carrier number at transparency.
    pub n0: f64,
    /// Purcell factor.
    pub f_p: f64,
    /// Bimolecular recombination coefficient (cm^3/s).
    pub b_rec: f64,
    /// Active-medium volume (cm^3).
    pub v_a: f64,
}

impl PhysicalParams {
    /// Parameter names as they appear in parameter files, in canonical order.
    pub const KEYS: [&'static str; 11] = [
        "kappa",
        "alpha",
        "K",
        "gamma_c",
        "gamma_par",
        "gamma_tot",
        "beta",
        "n0",
        "F_P",
        "B_rec",
        "V_a",
    ];

    /// Photonic-crystal nanolaser dimer: beta = 0.017, V_a = 0.016 um^3.
    pub fn nanolaser() -> Self {
        let kappa = 140.84;
        let v_a = 0.016e-12;
        Self {
            kappa,
            alpha: 7.0,
            k: 12.0 * kappa,
            gamma_c: 0.05 * kappa,
            gamma_par: 2.2,
            gamma_tot: 5.0,
            beta: 0.017,
            n0: TRANSPARENCY_DENSITY * v_a,
            f_p: 1.03,
            b_rec: 3e-10,
            v_a,
        }
    }

    /// Macroscopic counterpart: beta = 1.7e-5, V_a = 16 um^3.
    pub fn macroscopic() -> Self {
        Self::nanolaser().with_beta_coscaled(1.7e-5)
    }

    /// Returns a copy at a new `beta` with `V_a` scaled as `1/beta` through the
    /// nanolaser anchor and `n0` following at fixed transparency density.
    ///
    /// `beta * n0` is invariant, so the noiseless dynamics in units of `P/P0`
    /// and `beta * |a|^2` do not change.
    pub fn with_beta_coscaled(&self, beta: f64) -> Self {
        let anchor = Self::nanolaser();
        let v_a = anchor.v_a * anchor.beta / beta;
        Self {
            beta,
            v_a,
            n0: TRANSPARENCY_DENSITY * v_a,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("kappa", self.kappa),
            ("K", self.k),
            ("gamma_par", self.gamma_par),
            ("gamma_tot", self.gamma_tot),
            ("n0", self.n0),
            ("F_P", self.f_p),
            ("B_rec", self.b_rec),
            ("V_a", self.v_a),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.gamma_c.is_finite() && self.gamma_c >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "gamma_c",
                value: self.gamma_c,
                reason: "must be finite and non-negative",
            });
        }
        if !self.alpha.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "must be finite",
            });
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must satisfy 0 < beta <= 1",
            });
        }
        Ok(())
    }

    /// Intracavity saturation photon number `gamma_tot / (gamma_par * beta)`.
    pub fn saturation_photons(&self) -> f64 {
        self.gamma_tot / (self.gamma_par * self.beta)
    }

    /// Looks a parameter up by its file key.
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "kappa" => self.kappa,
            "alpha" => self.alpha,
            "K" => self.k,
            "gamma_c" => self.gamma_c,
            "gamma_par" => self.gamma_par,
            "gamma_tot" => self.gamma_tot,
            "beta" => self.beta,
            "n0" => self.n0,
            "F_P" => self.f_p,
            "B_rec" => self.b_rec,
            "V_a" => self.v_a,
            _ => return None,
        })
    }

    /// Sets a parameter by its file key. Returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "kappa" => &mut self.kappa,
            "alpha" => &mut self.alpha,
            "K" => &mut self.k,
            "gamma_c" => &mut self.gamma_c,
            "gamma_par" => &mut self.gamma_par,
            "gamma_tot" => &mut self.gamma_tot,
            "beta" => &mut self.beta,
            "n0" => &mut self.n0,
            "F_P" => &mut self.f_p,
            "B_rec" => &mut self.b_rec,
            "V_a" => &mut self.v_a,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Gain threshold of the bonding mode, `2 (kappa - gamma_c)`.
    pub fn bonding_threshold_gain(&self) -> f64 {
        2.0 * (self.kappa - self.gamma_c)
    }

    /// Carrier number clamped at the bonding-mode threshold.
    pub fn bonding_threshold_carriers(&self) -> f64 {
        self.n0 + self.bonding_threshold_gain() / (self.gamma_par * self.beta)
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::nanolaser()
    }
}

/// Two intracavity fields and two carrier numbers at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityState {
    pub a1: Complex64,
    pub a2: Complex64,
    pub n1: f64,
    pub n2: f64,
    pub t: f64,
}

impl CavityState {
    pub fn new(a1: Complex64, a2: Complex64, n1: f64, n2: f64) -> Self {
        Self {
            a1,
            a2,
            n1,
            n2,
            t: 0.0,
        }
    }

    pub fn intensity1(&self) -> f64 {
        self.a1.norm_sqr()
    }

    pub fn intensity2(&self) -> f64 {
        self.a2.norm_sqr()
    }

    pub fn total_intensity(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr()
    }

    /// Cavity 1 <-> cavity 2 mirror image.
    pub fn swapped(&self) -> Self {
        Self {
            a1: self.a2,
            a2: self.a1,
            n1: self.n2,
            n2: self.n1,
            t: self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a1.re.is_finite()
            && self.a1.im.is_finite()
            && self.a2.re.is_finite()
            && self.a2.im.is_finite()
            && self.n1.is_finite()
            && self.n2.is_finite()
    }

    /// Maps a state between parameter sets related by `with_beta_coscaled`:
    /// fields scale by `sqrt(beta_from / beta_to)`, carriers by `beta_from / beta_to`.
    pub fn rescaled_for_beta(&self, beta_from: f64, beta_to: f64) -> Self {
        let r = beta_from / beta_to;
        Self {
            a1: self.a1 * r.sqrt(),
            a2: self.a2 * r.sqrt(),
            n1: self.n1 * r,
            n2: self.n2 * r,
            t: self.t,
        }
    }
}

/// Time derivative of a [`CavityState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub da1: Complex64,
    pub da2: Complex64,
    pub dn1: f64,
    pub dn2: f64,
}

/// Bonding/antibonding decomposition and Bloch-sphere coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalFrame {
    pub i_b: f64,
    pub i_a: f64,
    pub i_tot: f64,
    /// Mode population imbalance in [-1, 1].
    pub x: f64,
    /// Polar angle in [0, pi].
    pub theta: f64,
    /// Relative phase of cavity 1 against cavity 2, in (-pi, pi].
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PumpKind {
    Constant,
    LinearRamp,
}

/// Pump rate as a function of time, in carriers/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub kind: PumpKind,
    pub p_start: f64,
    pub p_end: f64,
    /// ns
    pub duration: f64,
}

impl PumpSchedule {
    pub fn constant(pump: f64, duration: f64) -> Result<Self, ModelError> {
        let s = Self {
            kind: PumpKind::Constant,
            p_start: pump,
            p_end: pump,
            duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn linear_ramp(p_start: f64, p_end: f64, duration: f64) -> Result<Self, ModelError> {
        let s = Self {
            kind: PumpKind::LinearRamp,
            p_start,
            p_end,
            duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ModelError::InvalidSchedule(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.p_start >= 0.0 && self.p_end >= 0.0) {
            return Err(ModelError::InvalidSchedule(
                "pump rates must be non-negative".into(),
            ));
        }
        if self.kind == PumpKind::Constant && self.p_start != self.p_end {
            return Err(ModelError::InvalidSchedule(
                "constant schedule needs p_start == p_end".into(),
            ));
        }
        Ok(())
    }

    /// Pump at time `t` (ns since the schedule start), held at the end value past `duration`.
    pub fn pump_at(&self, t: f64) -> f64 {
        match self.kind {
            PumpKind::Constant => self.p_start,
            PumpKind::LinearRamp => {
                let s = (t / self.duration).clamp(0.0, 1.0);
                self.p_start + (self.p_end - self.p_start) * s
            }
        }
    }
}

/// Material gain `gamma_par * beta * (n - n0)`; negative below transparency.
pub fn gain(n: f64, p: &PhysicalParams) -> f64 {
    p.gamma_par * p.beta * (n - p.n0)
}

/// Spontaneous emission rate into the lasing mode, `beta F_P B n^2 / V_a`, in 1/ns.
pub fn spontaneous_rate(n: f64, p: &PhysicalParams) -> f64 {
    p.beta * p.f_p * p.b_rec * n * n / p.v_a * 1e-9
}

/// Deterministic right-hand side of the coupled rate equations.
pub fn drift(s: &CavityState, pump: f64, p: &PhysicalParams) -> StateDerivative {
    let g1 = gain(s.n1, p);
    let g2 = gain(s.n2, p);
    let amp = Complex64::new(0.5, 0.5 * p.alpha);
    let coupling = Complex64::new(p.gamma_c, p.k);
    StateDerivative {
        da1: (amp * g1 - p.kappa) * s.a1 + coupling * s.a2,
        da2: (amp * g2 - p.kappa) * s.a2 + coupling * s.a1,
        dn1: pump - p.gamma_tot * s.n1 - g1 * s.a1.norm_sqr(),
        dn2: pump - p.gamma_tot * s.n2 - g2 * s.a2.norm_sqr(),
    }
}

/// Bonding and antibonding amplitudes `((a1 + a2)/sqrt2, (a1 - a2)/sqrt2)`.
pub fn to_modal(a1: Complex64, a2: Complex64) -> (Complex64, Complex64) {
    ((a1 + a2) * FRAC_1_SQRT_2, (a1 - a2) * FRAC_1_SQRT_2)
}

/// Imbalance `x` and modal intensities without the angular coordinates.
pub fn mode_imbalance(a1: Complex64, a2: Complex64) -> Result<(f64, f64, f64), ModelError> {
    let (ab, aa) = to_modal(a1, a2);
    let i_b = ab.norm_sqr();
    let i_a = aa.norm_sqr();
    let tot = i_b + i_a;
    if !(tot > 0.0) {
        return Err(ModelError::DegenerateIntensity);
    }
    Ok((((i_b - i_a) / tot).clamp(-1.0, 1.0), i_b, i_a))
}

pub fn modal_frame(s: &CavityState) -> Result<ModalFrame, ModelError> {
    let (x, i_b, i_a) = mode_imbalance(s.a1, s.a2)?;
    let i1 = s.a1.norm_sqr();
    let i2 = s.a2.norm_sqr();
    // atan2 keeps both poles finite: theta = 0 at I2 = 0, pi at I1 = 0.
    let theta = 2.0 * i2.sqrt().atan2(i1.sqrt());
    let mut phi = (s.a1 * s.a2.conj()).arg();
    if phi <= -PI {
        phi += 2.0 * PI;
    }
    Ok(ModalFrame {
        i_b,
        i_a,
        i_tot: i_b + i_a,
        x,
        theta,
        phi,
    })
}

/// Limit-cycle order parameter `sqrt(1 - x^2)`.
pub fn order_parameter(x: f64) -> Result<f64, ModelError> {
    if !(x.abs() <= 1.0 + IMBALANCE_TOLERANCE) {
        return Err(ModelError::ImbalanceOutOfRange(x));
    }
    let x = x.clamp(-1.0, 1.0);
    Ok((1.0 - x * x).max(0.0).sqrt())
}

/// Pump that holds `n = n0` at zero field: `P0 = gamma_tot * n0`.
pub fn transparency_pump(p: &PhysicalParams) -> f64 {
    p.gamma_tot * p.n0
}

/// Noiseless bonding-mode fixed point at `pump`, if above its threshold.
///
/// Both cavities carry `I = (P - gamma_tot n_th) / G_th` photons with equal phase.
pub fn bonding_fixed_point(pump: f64, p: &PhysicalParams) -> Option<CavityState> {
    let g = p.bonding_threshold_gain();
    let n_th = p.bonding_threshold_carriers();
    let i = (pump - p.gamma_tot * n_th) / g;
    if i > 0.0 {
        let a = Complex64::new(i.sqrt(), 0.0);
        Some(CavityState::new(a, a, n_th, n_th))
    } else {
        None
    }
}
