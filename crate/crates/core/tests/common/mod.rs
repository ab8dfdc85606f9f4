//! Helpers shared by the integration test targets.

use nanodimer::ensemble::{phase_aligned_state, PhaseBranch};
use nanodimer::model::{spontaneous_rate, transparency_pump};
use nanodimer::sde::{trajectory_rng, Diagnostics, Integrator};
use nanodimer::{CavityState, IntegratorConfig, PhysicalParams, Scheme};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn em_config(dt: f64) -> IntegratorConfig {
    IntegratorConfig {
        dt,
        scheme: Scheme::EulerMaruyama,
        ..IntegratorConfig::default()
    }
}

/// Runs one path at `dt = fine * m`, feeding it Brownian increments built
/// from the shared fine-grid normals.
pub fn coupled_path(
    integ: &Integrator,
    p: &PhysicalParams,
    start: &CavityState,
    pump: f64,
    normals: &[[f64; 4]],
    fine: f64,
    m: usize,
) -> CavityState {
    let mut s = *start;
    let mut diag = Diagnostics::default();
    for block in normals.chunks(m) {
        let mut w = [0.0; 4];
        for z in block {
            for (acc, v) in w.iter_mut().zip(z) {
                *acc += v * fine.sqrt();
            }
        }
        let s1 = (0.5 * spontaneous_rate(s.n1, p)).sqrt();
        let s2 = (0.5 * spontaneous_rate(s.n2, p)).sqrt();
        let dw1 = Complex64::new(s1 * w[0], s1 * w[1]);
        let dw2 = Complex64::new(s2 * w[2], s2 * w[3]);
        s = integ.step_with_increments(&s, pump, dw1, dw2, &mut diag).unwrap();
    }
    s
}

/// Mean of `I1` after 0.02 ns of explicit Euler-Maruyama at steps 4h, 2h and h,
/// all paths driven by the same Brownian motion. Returns the three means and
/// the ratio of successive differences, which tends to 2 for weak order one.
pub fn em_weak_ratio(paths: u64) -> ([f64; 3], f64) {
    let p = PhysicalParams::nanolaser();
    let pump = 6.02 * transparency_pump(&p);
    let start = phase_aligned_state(pump, &p, std::f64::consts::FRAC_PI_4, PhaseBranch::InPhase).unwrap();
    let fine: f64 = 5e-6;
    let horizon = 0.02;
    let n_fine = (horizon / fine).round() as usize;
    let levels = [4usize, 2, 1];
    let integrators: Vec<Integrator> = levels
        .iter()
        .map(|&m| Integrator::new(&p, &em_config(fine * m as f64)).unwrap())
        .collect();
    let mut means = [0.0f64; 3];
    for path in 0..paths {
        let mut rng = trajectory_rng(11, path);
        let normals: Vec<[f64; 4]> = (0..n_fine)
            .map(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
            .collect();
        for (i, (&m, integ)) in levels.iter().zip(&integrators).enumerate() {
            let s = coupled_path(integ, &p, &start, pump, &normals, fine, m);
            means[i] += s.intensity1() / paths as f64;
        }
    }
    (means, (means[0] - means[1]) / (means[1] - means[2]))
}
