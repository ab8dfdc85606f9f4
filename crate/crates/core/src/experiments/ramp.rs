use serde::{Deserialize, Serialize};

use super::{locate_switching, opt, ExperimentError, SweepResult};
use crate::ensemble::{fold_trajectories, phase_aligned_state, PhaseBranch};
use crate::experiments::stationary::off_state;
use crate::model::{bonding_fixed_point, transparency_pump, PhysicalParams, PumpSchedule};
use crate::sde::{Diagnostics, Integrator, IntegratorConfig, DEFAULT_DT};
use crate::stats::{lowpass, Edges, JointHistogram, MomentAccumulator, Obs, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSettings {
    pub p_start_ratio: f64,
    pub p_end_ratio: f64,
    /// Ramp duration (ns).
    pub duration: f64,
    pub n_traj: usize,
    /// Width of the statistics time bins (ns).
    pub bin_width: f64,
    pub sample_stride: usize,
    pub dt: f64,
    /// Detector bandwidth (GHz) applied to the modal intensities.
    pub detector_bandwidth: Option<f64>,
    /// Noisy settling at the starting pump before the ramp (ns).
    pub warmup: f64,
    /// Joint `(x, I_tot)` histogram every this many bins.
    pub histogram_every: Option<usize>,
    pub master_seed: u64,
    pub lanes: usize,
}

impl Default for RampSettings {
    fn default() -> Self {
        Self {
            p_start_ratio: 5.95,
            p_end_ratio: 6.10,
            duration: 6.0,
            n_traj: 10_000,
            bin_width: 0.05,
            sample_stride: 10,
            dt: DEFAULT_DT,
            detector_bandwidth: Some(0.6),
            warmup: 20.0,
            histogram_every: Some(20),
            master_seed: 0,
            lanes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampBin {
    pub t_center: f64,
    pub pump_ratio: f64,
    pub raw: MomentAccumulator,
    pub filtered: Option<MomentAccumulator>,
    pub histogram: Option<JointHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampResult {
    pub settings: RampSettings,
    pub bins: Vec<RampBin>,
    /// Time of the `<x>` zero crossing from the unfiltered statistics.
    pub switching_time: Option<f64>,
    pub switching_pump_ratio: Option<f64>,
    pub diagnostics: Diagnostics,
}

struct TrajectoryBins {
    raw: Vec<MomentAccumulator>,
    filtered: Option<Vec<MomentAccumulator>>,
    hist: Vec<Option<JointHistogram>>,
    diag: Diagnostics,
}

/// Time-resolved ensemble statistics along a linear pump ramp.
pub fn ramp_experiment(p: &PhysicalParams, settings: &RampSettings) -> Result<RampResult, ExperimentError> {
    if !(settings.bin_width > 0.0 && settings.duration >= settings.bin_width) {
        return Err(ExperimentError::Grid("bin width must be positive and fit in the ramp".into()));
    }
    if settings.n_traj == 0 {
        return Err(ExperimentError::Grid("n_traj must be at least 1".into()));
    }
    let p0 = transparency_pump(p);
    let ramp = PumpSchedule::linear_ramp(
        settings.p_start_ratio * p0,
        settings.p_end_ratio * p0,
        settings.duration,
    )?;
    let icfg = IntegratorConfig {
        dt: settings.dt,
        record_stride: settings.sample_stride.max(1),
        ..IntegratorConfig::default()
    };
    let integ = Integrator::new(p, &icfg)?;
    let sample_dt = settings.dt * icfg.record_stride as f64;
    let n_bins = (settings.duration / settings.bin_width).round() as usize;
    let ramp_steps = integ.steps_for(settings.duration);
    let warm_steps = if settings.warmup > 0.0 {
        integ.steps_for(settings.warmup)
    } else {
        0
    };
    let warm = PumpSchedule::constant(ramp.p_start, settings.warmup.max(settings.dt))?;
    let start = phase_aligned_state(
        ramp.p_start,
        p,
        std::f64::consts::FRAC_PI_2 - 0.01,
        PhaseBranch::InPhase,
    )
    .unwrap_or_else(|_| off_state(ramp.p_start, p));
    let i_scale = bonding_fixed_point(ramp.p_end, p)
        .map(|s| s.total_intensity())
        .unwrap_or(1.0);
    let hist_edges = Edges::intensity_default(i_scale)?;
    let hist_at = |b: usize| settings.histogram_every.is_some_and(|e| e > 0 && b % e == e / 2);

    let mut raw = vec![MomentAccumulator::new(); n_bins];
    let mut filtered = settings
        .detector_bandwidth
        .map(|_| vec![MomentAccumulator::new(); n_bins]);
    let mut hist: Vec<Option<JointHistogram>> = (0..n_bins)
        .map(|b| hist_at(b).then(|| JointHistogram::new(Edges::imbalance_default(), hist_edges.clone())))
        .collect();
    let mut diagnostics = Diagnostics::default();

    fold_trajectories(
        settings.n_traj,
        settings.master_seed,
        settings.lanes,
        |_, rng| {
            let mut diag = Diagnostics::default();
            let mut s = start;
            if warm_steps > 0 {
                s = integ.run(&s, &warm, warm_steps, rng, &mut diag, |_, _| {})?;
            }
            s.t = 0.0;
            let mut bins = TrajectoryBins {
                raw: vec![MomentAccumulator::new(); n_bins],
                filtered: None,
                hist: (0..n_bins)
                    .map(|b| hist_at(b).then(|| JointHistogram::new(Edges::imbalance_default(), hist_edges.clone())))
                    .collect(),
                diag: Diagnostics::default(),
            };
            let mut b_trace = Vec::with_capacity((ramp_steps / icfg.record_stride as u64) as usize);
            let mut a_trace = Vec::with_capacity(b_trace.capacity());
            let mut bin_of = Vec::with_capacity(b_trace.capacity());
            integ.run(&s, &ramp, ramp_steps, rng, &mut diag, |k, st| {
                if k == 0 {
                    return;
                }
                let t = st.t - 0.5 * sample_dt;
                let b = ((t / settings.bin_width) as usize).min(n_bins - 1);
                let (i_b, i_a) = crate::model::to_modal(st.a1, st.a2);
                b_trace.push(i_b.norm_sqr());
                a_trace.push(i_a.norm_sqr());
                bin_of.push(b);
                match Sample::from_state(st) {
                    Some(sample) => {
                        bins.raw[b].push(&sample);
                        if let Some(h) = bins.hist[b].as_mut() {
                            h.push(sample.get(Obs::X), sample.get(Obs::ITot));
                        }
                    }
                    None => bins.raw[b].degenerate += 1,
                }
            })?;
            if let Some(f_c) = settings.detector_bandwidth {
                let fb = lowpass(&b_trace, sample_dt, f_c);
                let fa = lowpass(&a_trace, sample_dt, f_c);
                let mut acc = vec![MomentAccumulator::new(); n_bins];
                for ((&ib, &ia), &b) in fb.iter().zip(&fa).zip(&bin_of) {
                    match Sample::from_modal(ib, ia) {
                        Some(sample) => acc[b].push(&sample),
                        None => acc[b].degenerate += 1,
                    }
                }
                bins.filtered = Some(acc);
            }
            bins.diag = diag;
            Ok(bins)
        },
        |_, out| {
            for (a, b) in raw.iter_mut().zip(&out.raw) {
                a.merge(b);
            }
            if let (Some(f), Some(of)) = (filtered.as_mut(), out.filtered.as_ref()) {
                for (a, b) in f.iter_mut().zip(of) {
                    a.merge(b);
                }
            }
            for (h, oh) in hist.iter_mut().zip(&out.hist) {
                if let (Some(h), Some(oh)) = (h.as_mut(), oh.as_ref()) {
                    h.merge(oh).expect("identical edges");
                }
            }
            diagnostics.merge(&out.diag);
        },
    )?;

    let mut filtered = filtered.map(|f| f.into_iter());
    let bins: Vec<RampBin> = raw
        .into_iter()
        .zip(hist)
        .enumerate()
        .map(|(b, (raw, histogram))| {
            let t_center = (b as f64 + 0.5) * settings.bin_width;
            RampBin {
                t_center,
                pump_ratio: ramp.pump_at(t_center) / p0,
                raw,
                filtered: filtered.as_mut().and_then(|f| f.next()),
                histogram,
            }
        })
        .collect();
    let times: Vec<f64> = bins.iter().map(|b| b.t_center).collect();
    let mean_x: Vec<f64> = bins.iter().map(|b| b.raw.mean(Obs::X)).collect();
    let switching_time = locate_switching(&times, &mean_x);
    Ok(RampResult {
        settings: *settings,
        switching_pump_ratio: switching_time.map(|t| ramp.pump_at(t) / p0),
        switching_time,
        bins,
        diagnostics,
    })
}

fn g2_or_nan(acc: &MomentAccumulator, a: Obs, b: Obs) -> f64 {
    acc.g2(a, b).unwrap_or(f64::NAN)
}

impl RampResult {
    pub fn g2_ba_trace(&self) -> Vec<f64> {
        self.bins.iter().map(|b| g2_or_nan(&b.raw, Obs::IB, Obs::IA)).collect()
    }

    pub fn to_sweep(&self) -> Result<SweepResult, ExperimentError> {
        let rows = self
            .bins
            .iter()
            .map(|b| {
                let r = &b.raw;
                let g = r.g2_moments().ok();
                let mut row = vec![
                    b.t_center,
                    b.pump_ratio,
                    r.mean(Obs::X),
                    r.variance(Obs::X),
                    g2_or_nan(r, Obs::IB, Obs::IB),
                    g2_or_nan(r, Obs::IA, Obs::IA),
                    g2_or_nan(r, Obs::IB, Obs::IA),
                    g2_or_nan(r, Obs::ITot, Obs::ITot),
                    r.mean(Obs::A),
                    r.variance(Obs::A),
                    opt(g.map(|g| g.mean_x)),
                    opt(g.map(|g| g.var_x)),
                    opt(g.map(|g| g.mean_a2)),
                ];
                match &b.filtered {
                    Some(f) => row.extend([
                        f.mean(Obs::X),
                        f.variance(Obs::X),
                        g2_or_nan(f, Obs::IB, Obs::IB),
                        g2_or_nan(f, Obs::IA, Obs::IA),
                        g2_or_nan(f, Obs::IB, Obs::IA),
                        f.mean(Obs::A),
                        f.variance(Obs::A),
                    ]),
                    None => row.extend([f64::NAN; 7]),
                }
                row
            })
            .collect();
        SweepResult::new(
            "2",
            "t_ns",
            &[
                "P/P0",
                "mean_x",
                "var_x",
                "g2_BB",
                "g2_AA",
                "g2_BA",
                "g2_II",
                "mean_A",
                "var_A",
                "mean_x_from_g2",
                "var_x_from_g2",
                "mean_A2_from_g2",
                "det_mean_x",
                "det_var_x",
                "det_g2_BB",
                "det_g2_AA",
                "det_g2_BA",
                "det_mean_A",
                "det_var_A",
            ],
            rows,
            serde_json::json!({
                "settings": self.settings,
                "switching_time": self.switching_time,
                "switching_pump_ratio": self.switching_pump_ratio,
            }),
        )
    }

    /// Histogram bins as CSV: `t,x_lo,x_hi,I_lo,I_hi,count` for non-empty cells.
    pub fn write_histograms<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# figure=3")?;
        writeln!(w, "t_ns,P/P0,x_lo,x_hi,I_tot_lo,I_tot_hi,count")?;
        for b in &self.bins {
            let Some(h) = &b.histogram else { continue };
            let (xe, ye) = (h.x_edges.as_slice(), h.y_edges.as_slice());
            for i in 0..h.x_edges.bins() {
                for j in 0..h.y_edges.bins() {
                    let c = h.get(i, j);
                    if c > 0 {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{c}",
                            b.t_center,
                            b.pump_ratio,
                            xe[i],
                            xe[i + 1],
                            ye[j],
                            ye[j + 1]
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RampSettings {
        RampSettings {
            duration: 1.0,
            n_traj: 3,
            bin_width: 0.1,
            warmup: 0.5,
            histogram_every: Some(5),
            lanes: 1,
            ..RampSettings::default()
        }
    }

    #[test]
    fn bins_cover_the_ramp_with_all_trajectories() {
        let p = PhysicalParams::nanolaser();
        let r = ramp_experiment(&p, &small()).unwrap();
        assert_eq!(r.bins.len(), 10);
        // 0.1 ns bins at 1 ps sampling: 100 samples per trajectory per bin.
        for b in &r.bins {
            assert_eq!(b.raw.count + b.raw.degenerate, 300);
            assert_eq!(b.filtered.as_ref().unwrap().count, 300);
        }
        assert!(r.bins[0].pump_ratio < r.bins[9].pump_ratio);
        let hists = r.bins.iter().filter(|b| b.histogram.is_some()).count();
        assert_eq!(hists, 2);
        let again = ramp_experiment(&p, &RampSettings { lanes: 2, ..small() }).unwrap();
        assert_eq!(r.bins, again.bins);
        assert_eq!(r.diagnostics, again.diagnostics);
        let sweep = r.to_sweep().unwrap();
        assert_eq!(sweep.rows.len(), 10);
        let mut buf = Vec::new();
        r.write_histograms(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().count() > 2);
    }

    #[test]
    fn rejects_bad_bins() {
        let p = PhysicalParams::nanolaser();
        assert!(ramp_experiment(&p, &RampSettings { bin_width: 0.0, ..small() }).is_err());
        assert!(ramp_experiment(&p, &RampSettings { n_traj: 0, ..small() }).is_err());
    }
}
