//! Time-step refinement of the integrators.

mod common;

use nanodimer::ensemble::{phase_aligned_state, PhaseBranch};
use nanodimer::model::{mode_imbalance, transparency_pump};
use nanodimer::sde::{trajectory_rng, Diagnostics, Integrator};
use nanodimer::{IntegratorConfig, PhysicalParams, PumpSchedule};

#[test]
fn euler_maruyama_weak_error_is_first_order() {
    let (means, ratio) = common::em_weak_ratio(64);
    eprintln!("weak-order ratio {ratio:.4}");
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}, means {means:?}");
}

/// Time-averaged imbalance of `n_traj` independent windows, with the standard
/// error of the per-trajectory means.
fn mean_imbalance(p: &PhysicalParams, pump: f64, dt: f64, n_traj: u64, window: f64) -> (f64, f64) {
    let cfg = IntegratorConfig {
        dt,
        record_stride: ((1e-2 / dt).round() as usize).max(1),
        ..IntegratorConfig::default()
    };
    let integ = Integrator::new(p, &cfg).unwrap();
    let schedule = PumpSchedule::constant(pump, window).unwrap();
    let start = phase_aligned_state(pump, p, std::f64::consts::FRAC_PI_2 - 0.05, PhaseBranch::InPhase).unwrap();
    let per: Vec<f64> = (0..n_traj)
        .map(|i| {
            let mut rng = trajectory_rng(5, i);
            let mut diag = Diagnostics::default();
            let s = integ.run(&start, &schedule, integ.steps_for(10.0), &mut rng, &mut diag, |_, _| {}).unwrap();
            let (mut sum, mut count) = (0.0, 0usize);
            integ
                .run(&s, &schedule, integ.steps_for(window), &mut rng, &mut diag, |k, st| {
                    if k > 0 {
                        sum += mode_imbalance(st.a1, st.a2).unwrap().0;
                        count += 1;
                    }
                })
                .unwrap();
            sum / count as f64
        })
        .collect();
    let n = per.len() as f64;
    let m = per.iter().sum::<f64>() / n;
    let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn stationary_imbalance_is_stable_under_step_halving() {
    let p = PhysicalParams::nanolaser();
    let pump = 6.015 * transparency_pump(&p);
    let (m1, e1) = mean_imbalance(&p, pump, 1e-4, 8, 40.0);
    let (m2, e2) = mean_imbalance(&p, pump, 5e-5, 8, 40.0);
    let se = (e1 * e1 + e2 * e2).sqrt();
    eprintln!("<x>: {m1:.4} +- {e1:.4} at dt, {m2:.4} +- {e2:.4} at dt/2");
    assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2}, se {se}");
}
