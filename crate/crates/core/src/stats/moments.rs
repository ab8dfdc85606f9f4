use serde::{Deserialize, Serialize};

use super::{CorrelationSet, StatsError};
use crate::model::{mode_imbalance, CavityState};

/// Observables tracked by [`MomentAccumulator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum Obs {
    I1 = 0,
    I2,
    IB,
    IA,
    ITot,
    X,
    A,
}

impl Obs {
    pub const COUNT: usize = 7;
    pub const ALL: [Obs; Obs::COUNT] = [
        Obs::I1,
        Obs::I2,
        Obs::IB,
        Obs::IA,
        Obs::ITot,
        Obs::X,
        Obs::A,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Obs::I1 => "I1",
            Obs::I2 => "I2",
            Obs::IB => "I_B",
            Obs::IA => "I_A",
            Obs::ITot => "I_tot",
            Obs::X => "x",
            Obs::A => "A",
        }
    }
}

const PAIRS: usize = Obs::COUNT * (Obs::COUNT + 1) / 2;

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * Obs::COUNT - i * (i + 1) / 2 + j
}

/// Instantaneous observables of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample(pub [f64; Obs::COUNT]);

impl Sample {
    /// `None` when the total intensity is zero.
    pub fn from_state(s: &CavityState) -> Option<Self> {
        let (x, i_b, i_a) = mode_imbalance(s.a1, s.a2).ok()?;
        let a = (1.0 - x * x).max(0.0).sqrt();
        Some(Sample([
            s.a1.norm_sqr(),
            s.a2.norm_sqr(),
            i_b,
            i_a,
            i_b + i_a,
            x,
            a,
        ]))
    }

    /// Modal sample from `(I_B, I_A)` alone; `I1 = I2 = I_tot / 2`.
    pub fn from_modal(i_b: f64, i_a: f64) -> Option<Self> {
        let tot = i_b + i_a;
        if !(tot > 0.0) {
            return None;
        }
        let x = ((i_b - i_a) / tot).clamp(-1.0, 1.0);
        Some(Sample([
            0.5 * tot,
            0.5 * tot,
            i_b,
            i_a,
            tot,
            x,
            (1.0 - x * x).max(0.0).sqrt(),
        ]))
    }

    pub fn get(&self, o: Obs) -> f64 {
        self.0[o as usize]
    }
}

/// Mergeable power sums: counts, first moments and all second cross moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: u64,
    /// Samples rejected for vanishing intensity.
    pub degenerate: u64,
    sum: [f64; Obs::COUNT],
    cross: [f64; PAIRS],
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self {
            count: 0,
            degenerate: 0,
            sum: [0.0; Obs::COUNT],
            cross: [0.0; PAIRS],
        }
    }

    pub fn push(&mut self, s: &Sample) {
        self.count += 1;
        for i in 0..Obs::COUNT {
            self.sum[i] += s.0[i];
            for j in i..Obs::COUNT {
                self.cross[pair_index(i, j)] += s.0[i] * s.0[j];
            }
        }
    }

    /// Pushes the observables of `s`; returns `false` (and counts it) if degenerate.
    pub fn push_state(&mut self, s: &CavityState) -> bool {
        match Sample::from_state(s) {
            Some(sample) => {
                self.push(&sample);
                true
            }
            None => {
                self.degenerate += 1;
                false
            }
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        self.degenerate += other.degenerate;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
    }

    pub fn sum(&self, o: Obs) -> f64 {
        self.sum[o as usize]
    }

    pub fn cross_sum(&self, a: Obs, b: Obs) -> f64 {
        self.cross[pair_index(a as usize, b as usize)]
    }

    pub fn mean(&self, o: Obs) -> f64 {
        self.sum(o) / self.count as f64
    }

    /// Raw second moment `<a b>`.
    pub fn moment2(&self, a: Obs, b: Obs) -> f64 {
        self.cross_sum(a, b) / self.count as f64
    }

    /// Population variance, floored at zero.
    pub fn variance(&self, o: Obs) -> f64 {
        let m = self.mean(o);
        (self.moment2(o, o) - m * m).max(0.0)
    }

    /// `<a b> / (<a> <b>)`.
    pub fn g2(&self, a: Obs, b: Obs) -> Result<f64, StatsError> {
        if self.count < 2 {
            return Err(StatsError::TooFewSamples {
                needed: 2,
                got: self.count as usize,
            });
        }
        let ma = self.mean(a);
        let mb = self.mean(b);
        if !(ma > 0.0 && mb > 0.0) {
            return Err(StatsError::ZeroMean);
        }
        Ok(self.moment2(a, b) / (ma * mb))
    }

    pub fn correlation_set(&self) -> Result<CorrelationSet, StatsError> {
        Ok(CorrelationSet {
            count: self.count,
            g2_bb: self.g2(Obs::IB, Obs::IB)?,
            g2_aa: self.g2(Obs::IA, Obs::IA)?,
            g2_ba: self.g2(Obs::IB, Obs::IA)?,
            g2_ii: self.g2(Obs::ITot, Obs::ITot)?,
            mean_x: self.mean(Obs::X),
            mean_x2: self.moment2(Obs::X, Obs::X),
            var_x: self.variance(Obs::X),
            mean_a: self.mean(Obs::A),
            var_a: self.variance(Obs::A),
            mean_i_tot: self.mean(Obs::ITot),
        })
    }
}
