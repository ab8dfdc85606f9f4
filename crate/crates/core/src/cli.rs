//! Command-line front end: flat-file configuration, driver dispatch and
//! artifact output.
//!
//! A run is described by one flat `key = value` file holding physical
//! parameters, driver settings and the master seed. `--set` overrides are
//! applied on top, and the fully resolved file is echoed to `config.txt` in
//! the output directory so that `--params <out>/config.txt` repeats the run.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ensemble::{default_lanes, phase_aligned_state, PhaseBranch};
use crate::experiments::{
    beta_sweep, bifurcation_scan, ramp_experiment, stationary_scan, BetaSweepSettings,
    ExperimentError, RampSettings, ScanSettings, StationarySettings, SweepResult, FIGURE_PUMPS,
};
use crate::model::{transparency_pump, PhysicalParams, PumpSchedule};
use crate::params_file::{
    check_schema, nearest_key, params_hash, params_text, parse_pairs, ConfigError, ParamFile,
    SCHEMA_VERSION,
};
use crate::sde::{integrate, trajectory_rng, IntegratorConfig, SdeError, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bifurcation,
    Stationary,
    Ramp,
    BetaSweep,
    Trajectory,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bifurcation => "bifurcation",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Ramp => "ramp",
            ExperimentKind::BetaSweep => "beta-sweep",
            ExperimentKind::Trajectory => "trajectory",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nanodimer", version, about = "Coupled nanolaser Langevin simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noiseless attractor classification over a pump grid.
    Bifurcation(CommonArgs),
    /// Stationary photon statistics over a pump grid.
    Stationary(CommonArgs),
    /// Time-resolved statistics along a linear pump ramp.
    Ramp(CommonArgs),
    /// Stationary scans over a grid of spontaneous-emission factors.
    BetaSweep(CommonArgs),
    /// One sampled trajectory.
    Trajectory(CommonArgs),
}

impl Command {
    pub fn split(&self) -> (ExperimentKind, &CommonArgs) {
        match self {
            Command::Bifurcation(a) => (ExperimentKind::Bifurcation, a),
            Command::Stationary(a) => (ExperimentKind::Stationary, a),
            Command::Ramp(a) => (ExperimentKind::Ramp, a),
            Command::BetaSweep(a) => (ExperimentKind::BetaSweep, a),
            Command::Trajectory(a) => (ExperimentKind::Trajectory, a),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Override one key, e.g. `--set beta=0.017`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to NANODIMER_LANES or the core count.
    #[arg(long)]
    pub lanes: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Sde(#[from] SdeError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Experiment(_) => "experiment",
            CliError::Sde(_) => "integration",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn report(&self) -> serde_json::Value {
        serde_json::json!({"error": self.kind(), "message": self.to_string()})
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueKind {
    Real,
    Count,
    Flag,
    List,
}

struct RunKey {
    name: &'static str,
    kind: ValueKind,
    kinds: &'static [ExperimentKind],
    default: fn() -> String,
}

use ExperimentKind::{BetaSweep as BS, Bifurcation as BF, Ramp as RP, Stationary as ST, Trajectory as TR};

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect()
}

const RUN_KEYS: &[RunKey] = &[
    RunKey { name: "dt", kind: ValueKind::Real, kinds: &[BF, ST, RP, BS, TR], default: || DEFAULT_DT.to_string() },
    RunKey { name: "pumps", kind: ValueKind::List, kinds: &[BF], default: || list(&FIGURE_PUMPS) },
    RunKey { name: "pumps", kind: ValueKind::List, kinds: &[ST, BS], default: || list(&grid(5.97, 0.005, 21)) },
    RunKey { name: "chunk", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().chunk.to_string() },
    RunKey { name: "min_time", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().min_time.to_string() },
    RunKey { name: "max_time", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().max_time.to_string() },
    RunKey { name: "tolerance", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().tolerance.to_string() },
    RunKey { name: "tilt", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().tilt.to_string() },
    RunKey { name: "cycle_threshold", kind: ValueKind::Real, kinds: &[BF], default: || ScanSettings::default().cycle_threshold.to_string() },
    RunKey { name: "n_traj", kind: ValueKind::Count, kinds: &[ST, BS], default: || StationarySettings::default().n_traj.to_string() },
    RunKey { name: "n_traj", kind: ValueKind::Count, kinds: &[RP], default: || RampSettings::default().n_traj.to_string() },
    RunKey { name: "transient", kind: ValueKind::Real, kinds: &[ST, BS], default: || StationarySettings::default().transient.to_string() },
    RunKey { name: "window", kind: ValueKind::Real, kinds: &[ST, BS], default: || StationarySettings::default().window.to_string() },
    RunKey { name: "sample_stride", kind: ValueKind::Count, kinds: &[ST, BS], default: || StationarySettings::default().sample_stride.to_string() },
    RunKey { name: "sample_stride", kind: ValueKind::Count, kinds: &[RP], default: || RampSettings::default().sample_stride.to_string() },
    RunKey { name: "relax", kind: ValueKind::Flag, kinds: &[ST, BS], default: || "1".into() },
    RunKey { name: "betas", kind: ValueKind::List, kinds: &[BS], default: || list(&BetaSweepSettings::default().betas) },
    RunKey { name: "dip_prominence", kind: ValueKind::Real, kinds: &[BS], default: || BetaSweepSettings::default().dip_prominence.to_string() },
    RunKey { name: "P_start", kind: ValueKind::Real, kinds: &[RP], default: || RampSettings::default().p_start_ratio.to_string() },
    RunKey { name: "P_end", kind: ValueKind::Real, kinds: &[RP], default: || RampSettings::default().p_end_ratio.to_string() },
    RunKey { name: "duration", kind: ValueKind::Real, kinds: &[RP], default: || RampSettings::default().duration.to_string() },
    RunKey { name: "bin_width", kind: ValueKind::Real, kinds: &[RP], default: || RampSettings::default().bin_width.to_string() },
    RunKey { name: "detector_bandwidth", kind: ValueKind::Real, kinds: &[RP], default: || "0.6".into() },
    RunKey { name: "warmup", kind: ValueKind::Real, kinds: &[RP], default: || RampSettings::default().warmup.to_string() },
    RunKey { name: "histogram_every", kind: ValueKind::Count, kinds: &[RP], default: || "20".into() },
    RunKey { name: ParamFile::PUMP_KEY, kind: ValueKind::Real, kinds: &[TR], default: || "6.02".into() },
    RunKey { name: "steps", kind: ValueKind::Count, kinds: &[TR], default: || "1000".into() },
    RunKey { name: "record_stride", kind: ValueKind::Count, kinds: &[TR], default: || "10".into() },
    RunKey { name: "noise", kind: ValueKind::Flag, kinds: &[TR], default: || "1".into() },
    RunKey { name: "theta", kind: ValueKind::Real, kinds: &[TR], default: || std::f64::consts::FRAC_PI_4.to_string() },
];

fn keys_for(kind: ExperimentKind) -> impl Iterator<Item = &'static RunKey> {
    RUN_KEYS.iter().filter(move |k| k.kinds.contains(&kind))
}

fn check_value(key: &RunKey, value: &str, line: Option<usize>) -> Result<String, ConfigError> {
    let bad = |message: &str| ConfigError::InvalidValue {
        key: key.name.to_string(),
        value: value.to_string(),
        line,
        message: message.to_string(),
    };
    let real = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match key.kind {
        ValueKind::Real => real(value).map(|v| v.to_string()).ok_or_else(|| bad("expected a finite number")),
        ValueKind::Count => value.parse::<u64>().map(|v| v.to_string()).map_err(|_| bad("expected a non-negative integer")),
        ValueKind::Flag => match value {
            "1" | "true" | "yes" => Ok("1".into()),
            "0" | "false" | "no" => Ok("0".into()),
            _ => Err(bad("expected 0 or 1")),
        },
        ValueKind::List => {
            let items: Option<Vec<f64>> = value.split(',').map(real).collect();
            match items {
                Some(v) if !v.is_empty() => Ok(list(&v)),
                _ => Err(bad("expected a comma-separated list of numbers")),
            }
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub params_path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub out: PathBuf,
    pub seed: u64,
    pub lanes: usize,
    pub params: PhysicalParams,
    /// Driver settings in canonical order, already validated.
    pub settings: Vec<(String, String)>,
}

fn split_override(raw: &str) -> Result<(String, String), ConfigError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Syntax {
            line: 0,
            message: format!("override '{raw}' is not of the form key=value"),
        }),
    }
}

/// Resolves `file_text` plus overrides against the defaults of `kind`.
/// The seed flag, when given, wins over a `seed` entry in the file.
pub fn resolve(
    kind: ExperimentKind,
    file_text: Option<&str>,
    overrides: &[(String, String)],
    seed: Option<u64>,
) -> Result<(PhysicalParams, Vec<(String, String)>, u64), ConfigError> {
    let mut params = PhysicalParams::default();
    let mut settings: Vec<(String, String)> = keys_for(kind).map(|k| (k.name.to_string(), (k.default)())).collect();
    let mut file_seed = None;
    let known = || {
        PhysicalParams::KEYS
            .iter()
            .copied()
            .chain(keys_for(kind).map(|k| k.name))
            .chain(["schema", "seed"])
    };
    let mut apply = |key: &str, value: &str, line: Option<usize>| -> Result<(), ConfigError> {
        if key == "seed" {
            file_seed = Some(value.parse::<u64>().map_err(|_| ConfigError::InvalidValue {
                key: key.into(),
                value: value.into(),
                line,
                message: "expected a non-negative integer".into(),
            })?);
            return Ok(());
        }
        if params.get(key).is_some() {
            let v = value.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                key: key.into(),
                value: value.into(),
                line,
                message: e.to_string(),
            })?;
            params.set(key, v);
            return Ok(());
        }
        if let Some(spec) = keys_for(kind).find(|k| k.name == key) {
            let v = check_value(spec, value, line)?;
            if let Some(slot) = settings.iter_mut().find(|(k, _)| k == key) {
                slot.1 = v;
            }
            return Ok(());
        }
        Err(ConfigError::UnknownKey {
            key: key.to_string(),
            line,
            suggestion: nearest_key(key, known()),
        })
    };
    if let Some(text) = file_text {
        for pair in parse_pairs(text)? {
            if pair.key == "schema" {
                check_schema(&pair)?;
            } else {
                apply(&pair.key, &pair.value, Some(pair.line))?;
            }
        }
    }
    for (k, v) in overrides {
        apply(k, v, None)?;
    }
    params.validate().map_err(|e| ConfigError::InvalidValue {
        key: "params".into(),
        value: String::new(),
        line: None,
        message: e.to_string(),
    })?;
    Ok((params, settings, seed.or(file_seed).unwrap_or(0)))
}

/// Reads the parameter file and applies the overrides.
pub fn parse_config(kind: ExperimentKind, args: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = match &args.params {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| io_err(path, e))?),
        None => None,
    };
    let overrides = args
        .overrides
        .iter()
        .map(|s| split_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let (params, settings, seed) = resolve(kind, text.as_deref(), &overrides, args.seed)?;
    Ok(RunConfig {
        kind,
        params_path: args.params.clone(),
        overrides,
        out: args.out.clone(),
        seed,
        lanes: args.lanes.filter(|&n| n > 0).unwrap_or_else(default_lanes),
        params,
        settings,
    })
}

impl RunConfig {
    fn raw(&self, key: &str) -> &str {
        self.settings
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("setting '{key}' is not defined for {}", self.kind.name()))
    }

    pub fn real(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated real")
    }

    pub fn count(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated count")
    }

    pub fn flag(&self, key: &str) -> bool {
        self.raw(key) == "1"
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        self.raw(key).split(',').map(|s| s.parse().expect("validated list")).collect()
    }

    /// Resolved configuration in parameter-file syntax.
    pub fn echo(&self) -> String {
        let mut out = format!("# nanodimer {}\nschema = {SCHEMA_VERSION}\nseed = {}\n", self.kind.name(), self.seed);
        out.push_str(&params_text(&self.params));
        for (k, v) in &self.settings {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn scan_settings(&self) -> ScanSettings {
        ScanSettings {
            dt: self.real("dt"),
            chunk: self.real("chunk"),
            min_time: self.real("min_time"),
            max_time: self.real("max_time"),
            tolerance: self.real("tolerance"),
            tilt: self.real("tilt"),
            cycle_threshold: self.real("cycle_threshold"),
        }
    }

    fn stationary_settings(&self) -> StationarySettings {
        StationarySettings {
            n_traj: self.count("n_traj"),
            transient: self.real("transient"),
            window: self.real("window"),
            sample_stride: self.count("sample_stride"),
            dt: self.real("dt"),
            master_seed: self.seed,
            lanes: self.lanes,
            relax: self.flag("relax").then(|| ScanSettings {
                dt: self.real("dt"),
                ..ScanSettings::default()
            }),
            traces: true,
        }
    }

    fn ramp_settings(&self) -> RampSettings {
        let bw = self.real("detector_bandwidth");
        let every = self.count("histogram_every");
        RampSettings {
            p_start_ratio: self.real("P_start"),
            p_end_ratio: self.real("P_end"),
            duration: self.real("duration"),
            n_traj: self.count("n_traj"),
            bin_width: self.real("bin_width"),
            sample_stride: self.count("sample_stride"),
            dt: self.real("dt"),
            detector_bandwidth: (bw > 0.0).then_some(bw),
            warmup: self.real("warmup"),
            histogram_every: (every > 0).then_some(every),
            master_seed: self.seed,
            lanes: self.lanes,
        }
    }
}

/// One written file and its content digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: ExperimentKind,
    pub seed: u64,
    pub params_hash: String,
    pub lanes: usize,
    pub created_unix: u64,
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Output<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Output<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        body(&mut buf).map_err(|e| io_err(&path, e))?;
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: hex_digest(&buf),
        });
        Ok(())
    }

    fn sweep(&mut self, name: &str, s: &SweepResult) -> Result<serde_json::Value, CliError> {
        self.write(name, |w| s.write_csv(w))?;
        Ok(s.summary_json())
    }
}

/// Runs the configured driver and writes `config.txt`, the driver CSVs and
/// `manifest.json` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<Manifest, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    let mut out = Output {
        dir: &cfg.out,
        artifacts: Vec::new(),
    };
    let echo = cfg.echo();
    out.write("config.txt", |w| w.write_all(echo.as_bytes()))?;
    let p = &cfg.params;
    let summary = match cfg.kind {
        ExperimentKind::Bifurcation => {
            let r = bifurcation_scan(&cfg.list("pumps"), p, &cfg.scan_settings())?;
            out.sweep("bifurcation.csv", &r.to_sweep()?)?
        }
        ExperimentKind::Stationary => {
            let r = stationary_scan(&cfg.list("pumps"), p, &cfg.stationary_settings())?;
            out.sweep("stationary.csv", &r.to_sweep("stationary")?)?
        }
        ExperimentKind::Ramp => {
            let r = ramp_experiment(p, &cfg.ramp_settings())?;
            let s = out.sweep("ramp.csv", &r.to_sweep()?)?;
            out.write("ramp_histograms.csv", |w| r.write_histograms(w))?;
            s
        }
        ExperimentKind::BetaSweep => {
            let settings = BetaSweepSettings {
                betas: cfg.list("betas"),
                pump_ratios: cfg.list("pumps"),
                stationary: cfg.stationary_settings(),
                dip_prominence: cfg.real("dip_prominence"),
            };
            let r = beta_sweep(p, &settings)?;
            for (i, b) in r.points.iter().enumerate() {
                out.sweep(&format!("beta_sweep_profile_{i}.csv"), &b.scan.to_sweep(&format!("beta={}", b.beta))?)?;
            }
            out.sweep("beta_sweep.csv", &r.to_sweep()?)?
        }
        ExperimentKind::Trajectory => run_trajectory(cfg, &mut out)?,
    };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cfg.kind,
        seed: cfg.seed,
        params_hash: params_hash(p),
        lanes: cfg.lanes,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        artifacts: out.artifacts,
        summary,
    };
    let path = cfg.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

fn run_trajectory(cfg: &RunConfig, out: &mut Output) -> Result<serde_json::Value, CliError> {
    let p = &cfg.params;
    let icfg = IntegratorConfig {
        dt: cfg.real("dt"),
        record_stride: cfg.count("record_stride").max(1),
        noise: cfg.flag("noise"),
        seed: cfg.seed,
        ..IntegratorConfig::default()
    };
    let steps = cfg.count("steps").max(1);
    let pump = cfg.real(ParamFile::PUMP_KEY) * transparency_pump(p);
    let start = phase_aligned_state(pump, p, cfg.real("theta"), PhaseBranch::InPhase)
        .map_err(|e| ExperimentError::from(e))?;
    let schedule = PumpSchedule::constant(pump, steps as f64 * icfg.dt).map_err(SdeError::from)?;
    let mut rng = trajectory_rng(cfg.seed, 0);
    let rec = integrate(&start, &schedule, p, &icfg, &mut rng)?;
    out.write("trajectory.csv", |w| rec.write_csv(w, p, &icfg, 1))?;
    Ok(serde_json::json!({
        "rows": rec.len().saturating_sub(1),
        "steps": rec.diagnostics.steps,
        "clamp_count": rec.diagnostics.clamp_count,
    }))
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, common) = cli.command.split();
    let result = parse_config(kind, common).and_then(|cfg| run(&cfg));
    match result {
        Ok(m) => {
            for a in &m.artifacts {
                eprintln!("wrote {}", cfg_path(&common.out, &a.file));
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}

fn cfg_path(dir: &Path, file: &str) -> String {
    dir.join(file).display().to_string()
}
