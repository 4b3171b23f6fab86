//! Config-driven scenario orchestration with deterministic CSV output.
//!
//! A scenario is one JSON document holding the model parameters, exactly one
//! command section (`steady`, `dispersion`, `mode`, `simulate`, or
//! `aggregate`), an RNG seed, and an output directory. Running a scenario
//! writes plot-ready CSV files plus a `manifest.json` echoing the config and
//! derived quantities. With a fixed config and seed, all CSV outputs are
//! byte-identical across runs (the manifest differs only in wall time).

use crate::aggregate::{self, AggregateError, TransactionEvent};
use crate::output::{fmt_f64, write_atomic};
use crate::params::{InvalidParams, ModelParams};
use crate::solver::{self, SolverError, SolverOptions};
use crate::wave::{self, ModeSpec, RootSet, WaveError, WaveMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config must contain exactly one command section out of {expected}; found [{found}]")]
    ExactlyOneCommand {
        expected: &'static str,
        found: String,
    },
    #[error("command `{requested}` requested but config carries section `{configured}`")]
    CommandMismatch {
        requested: &'static str,
        configured: &'static str,
    },
    #[error("section `{section}`: {message}")]
    BadSection {
        section: &'static str,
        message: String,
    },
    #[error("steady profile not positive over the square; cannot sample events")]
    DegenerateDensity,
    #[error(transparent)]
    Model(#[from] InvalidParams),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// Process exit code contract: 0 ok, 2 config error, 3 numeric failure,
    /// 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. }
            | ScenarioError::UnknownKey(_)
            | ScenarioError::ExactlyOneCommand { .. }
            | ScenarioError::CommandMismatch { .. }
            | ScenarioError::BadSection { .. }
            | ScenarioError::DegenerateDensity
            | ScenarioError::Model(_) => 2,
            ScenarioError::Wave(_) | ScenarioError::Solver(_) => 3,
            ScenarioError::Aggregate(AggregateError::Io(_)) | ScenarioError::Io { .. } => 4,
            ScenarioError::Aggregate(_) => 2,
        }
    }
}

/// Grid resolution for the steady-field table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default = "default_steady_n")]
    pub n_x: usize,
    #[serde(default = "default_steady_n")]
    pub n_y: usize,
}

fn default_steady_n() -> usize {
    64
}

/// Wave-number sweep for the dispersion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub k_min: f64,
    pub k_max: f64,
    #[serde(default = "default_n_k")]
    pub n_k: usize,
}

fn default_n_k() -> usize {
    100
}

/// Mode kinds as config strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKindConfig {
    SingleDecay,
    GrowthPair,
    General,
}

/// One analytic mode: wave number, optional explicit frequency (solved from
/// the dispersion relation when absent), kind, and for the general kind the
/// two free weights on the `±s2` roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k: f64,
    #[serde(default)]
    pub omega: Option<f64>,
    pub kind: ModeKindConfig,
    #[serde(default)]
    pub lambdas: Option<[f64; 2]>,
    /// Sample count of the emitted profile table.
    #[serde(default = "default_profile_samples")]
    pub n_samples: usize,
}

fn default_profile_samples() -> usize {
    129
}

/// Mode seed for the simulator; `x_periods` fixes `L_x = x_periods·2π/k`
/// when the simulate section leaves `l_x` unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedModeConfig {
    pub k: f64,
    #[serde(default)]
    pub omega: Option<f64>,
    pub kind: ModeKindConfig,
    #[serde(default)]
    pub lambdas: Option<[f64; 2]>,
    pub amplitude: f64,
    #[serde(default = "default_x_periods")]
    pub x_periods: u32,
}

fn default_x_periods() -> u32 {
    1
}

/// Gaussian pulse seed for the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedPulseConfig {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_x: usize,
    pub n_y: usize,
    #[serde(default)]
    pub l_x: Option<f64>,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    pub n_steps: usize,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub seed_mode: Option<SeedModeConfig>,
    #[serde(default)]
    pub seed_pulse: Option<SeedPulseConfig>,
    #[serde(default)]
    pub sponge: bool,
}

fn default_dt_factor() -> f64 {
    0.9
}

fn default_snapshot_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateConfig {
    /// CSV file of transaction events; mutually exclusive with `synth_m`.
    #[serde(default)]
    pub events_path: Option<PathBuf>,
    pub n_cells: usize,
    /// Sample this many synthetic events from the steady credits profile
    /// instead of reading a file.
    #[serde(default)]
    pub synth_m: Option<usize>,
}

/// One scenario: model parameters plus exactly one command section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateConfig>,
}

/// The five scenario commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Steady,
    Dispersion,
    Mode,
    Simulate,
    Aggregate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Dispersion => "dispersion",
            Command::Mode => "mode",
            Command::Simulate => "simulate",
            Command::Aggregate => "aggregate",
        }
    }
}

impl ScenarioConfig {
    /// The single configured command; errors unless exactly one section is
    /// present.
    pub fn command(&self) -> Result<Command, ScenarioError> {
        let mut found = Vec::new();
        if self.steady.is_some() {
            found.push(Command::Steady);
        }
        if self.dispersion.is_some() {
            found.push(Command::Dispersion);
        }
        if self.mode.is_some() {
            found.push(Command::Mode);
        }
        if self.simulate.is_some() {
            found.push(Command::Simulate);
        }
        if self.aggregate.is_some() {
            found.push(Command::Aggregate);
        }
        if found.len() == 1 {
            Ok(found[0])
        } else {
            Err(ScenarioError::ExactlyOneCommand {
                expected: "steady|dispersion|mode|simulate|aggregate",
                found: found
                    .iter()
                    .map(|c| c.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
        }
    }
}

/// Parses and structurally validates a scenario config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(classify_json_error)?;
    config.command()?;
    if let Some(sim) = &config.simulate {
        match (sim.seed_mode.is_some(), sim.seed_pulse.is_some()) {
            (true, true) => {
                return Err(ScenarioError::BadSection {
                    section: "simulate",
                    message: "seed_mode and seed_pulse are mutually exclusive".into(),
                })
            }
            (false, false) => {
                return Err(ScenarioError::BadSection {
                    section: "simulate",
                    message: "one of seed_mode or seed_pulse is required".into(),
                })
            }
            _ => {}
        }
        if sim.snapshot_every == 0 {
            return Err(ScenarioError::BadSection {
                section: "simulate",
                message: "snapshot_every must be at least 1".into(),
            });
        }
        if !(sim.dt_factor > 0.0 && sim.dt_factor <= 1.0) {
            return Err(ScenarioError::BadSection {
                section: "simulate",
                message: format!("dt_factor = {} must lie in (0, 1]", sim.dt_factor),
            });
        }
    }
    if let Some(agg) = &config.aggregate {
        match (&agg.events_path, agg.synth_m) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::BadSection {
                    section: "aggregate",
                    message: "events_path and synth_m are mutually exclusive".into(),
                })
            }
            (None, None) => {
                return Err(ScenarioError::BadSection {
                    section: "aggregate",
                    message: "one of events_path or synth_m is required".into(),
                })
            }
            (None, Some(0)) => {
                return Err(ScenarioError::BadSection {
                    section: "aggregate",
                    message: "synth_m must be at least 1".into(),
                })
            }
            _ => {}
        }
        if agg.n_cells == 0 {
            return Err(ScenarioError::BadSection {
                section: "aggregate",
                message: "n_cells must be at least 1".into(),
            });
        }
    }
    if let Some(disp) = &config.dispersion {
        if !(disp.k_min > 0.0 && disp.k_max >= disp.k_min) || disp.n_k == 0 {
            return Err(ScenarioError::BadSection {
                section: "dispersion",
                message: "need 0 < k_min <= k_max and n_k >= 1".into(),
            });
        }
    }
    Ok(config)
}

fn classify_json_error(err: serde_json::Error) -> ScenarioError {
    let message = err.to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(name) = rest.split('`').next() {
            return ScenarioError::UnknownKey(name.to_string());
        }
    }
    ScenarioError::Parse {
        line: err.line(),
        column: err.column(),
        message,
    }
}

/// Synthesizes `m` transaction events with `(x, y)` drawn proportional to
/// the steady credits profile (rejection sampling against its maximum over
/// the square), each carrying `amount = total_mass/m` so the aggregated
/// density reproduces the profile, and velocities standard-normal scaled by
/// 0.1. Fully deterministic under `rng_seed`.
pub fn synth_events(
    params: &ModelParams,
    m: usize,
    rng_seed: u64,
) -> Result<Vec<TransactionEvent>, ScenarioError> {
    params.validate()?;
    if m == 0 {
        return Err(ScenarioError::BadSection {
            section: "aggregate",
            message: "synth_m must be at least 1".into(),
        });
    }
    let x_max = params.x_max;
    let corners = [(0.0, 0.0), (0.0, x_max), (x_max, 0.0), (x_max, x_max)];
    let mut max_a = f64::MIN;
    let mut min_a = f64::MAX;
    for &(cx, cy) in &corners {
        let v = params.steady_a_unchecked(cx, cy);
        max_a = max_a.max(v);
        min_a = min_a.min(v);
    }
    // Affine profile: corner extrema decide positivity everywhere.
    if min_a <= 0.0 {
        return Err(ScenarioError::DegenerateDensity);
    }
    let total_mass = params.steady_a_unchecked(x_max / 2.0, x_max / 2.0) * x_max * x_max;
    let amount = total_mass / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut events = Vec::with_capacity(m);
    while events.len() < m {
        let x = rng.random_range(0.0..x_max);
        let y = rng.random_range(0.0..x_max);
        let u: f64 = rng.random_range(0.0..max_a);
        if u <= params.steady_a_unchecked(x, y) {
            let v_creditor = 0.1 * rng.sample::<f64, _>(StandardNormal);
            let v_borrower = 0.1 * rng.sample::<f64, _>(StandardNormal);
            events.push(TransactionEvent {
                x,
                y,
                amount,
                v_creditor,
                v_borrower,
            });
        }
    }
    Ok(events)
}

/// Echo of the run: config, version, derived quantities, written files,
/// wall time. Everything except `wall_time_s` is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: ScenarioConfig,
    pub derived: Map<String, Value>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Worker cap from `ESPACE_THREADS` (default 1).
pub fn worker_cap() -> usize {
    std::env::var("ESPACE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Runs the configured command and writes its outputs (atomically) under
/// the effective output directory: `out_override`, else the config's
/// `output_dir`, else `espace_out`.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunManifest, ScenarioError> {
    let started = std::time::Instant::now();
    let mut config = config.clone();
    if let Some(seed) = seed_override {
        config.rng_seed = seed;
    }
    let out_dir: PathBuf = out_override
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("espace_out"));
    let command = config.command()?;
    config.params.validate()?;

    let mut files: Vec<(String, String)> = Vec::new();
    let mut derived = Map::new();
    match command {
        Command::Steady => run_steady(&config, &mut files, &mut derived)?,
        Command::Dispersion => run_dispersion(&config, &mut files, &mut derived)?,
        Command::Mode => run_mode(&config, &mut files, &mut derived)?,
        Command::Simulate => run_simulate(&config, &mut files, &mut derived)?,
        Command::Aggregate => run_aggregate(&config, &mut files, &mut derived)?,
    }

    let mut outputs = Vec::new();
    for (name, contents) in &files {
        let path = out_dir.join(name);
        write_atomic(&path, contents.as_bytes()).map_err(|source| ScenarioError::Io {
            path: path.clone(),
            source,
        })?;
        outputs.push(name.clone());
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        config,
        derived,
        outputs,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    let path = out_dir.join("manifest.json");
    write_atomic(&path, manifest_json.as_bytes()).map_err(|source| ScenarioError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(manifest)
}

fn run_steady(
    config: &ScenarioConfig,
    files: &mut Vec<(String, String)>,
    derived: &mut Map<String, Value>,
) -> Result<(), ScenarioError> {
    let sc = config.steady.as_ref().expect("command checked");
    let p = &config.params;
    let mut csv = String::from("xi,yi,x,y,A,B\n");
    for i in 0..=sc.n_x {
        let x = p.x_max * i as f64 / sc.n_x as f64;
        for j in 0..=sc.n_y {
            let y = p.x_max * j as f64 / sc.n_y as f64;
            let a = p.steady_a_unchecked(x, y);
            let b = p.steady_b_unchecked(x, y);
            let _ = writeln!(
                csv,
                "{i},{j},{},{},{},{}",
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(a),
                fmt_f64(b)
            );
        }
    }
    files.push(("steady.csv".into(), csv));
    derived.insert("corner_A".into(), json!(p.a0));
    derived.insert("corner_B".into(), json!(p.b0));
    Ok(())
}

fn run_dispersion(
    config: &ScenarioConfig,
    files: &mut Vec<(String, String)>,
    derived: &mut Map<String, Value>,
) -> Result<(), ScenarioError> {
    let dc = config.dispersion.as_ref().expect("command checked");
    let p = &config.params;
    p.validate_for_waves()?;
    let mut csv = String::from("k,omega,s1,s2,discriminant,region\n");
    let mut solved = 0usize;
    for idx in 0..dc.n_k {
        let k = if dc.n_k == 1 {
            dc.k_min
        } else {
            dc.k_min + (dc.k_max - dc.k_min) * idx as f64 / (dc.n_k - 1) as f64
        };
        let row = match wave::dispersion_solve(p, k) {
            Ok(branch) => {
                solved += 1;
                let coeffs = wave::quartic_coefficients(p, k, branch.omega)?;
                let disc = coeffs.discriminant();
                match wave::characteristic_roots(&coeffs)? {
                    RootSet::Real { s1, s2 } => format!(
                        "{},{},{},{},{},real",
                        fmt_f64(k),
                        fmt_f64(branch.omega),
                        fmt_f64(s1),
                        fmt_f64(s2),
                        fmt_f64(disc)
                    ),
                    RootSet::Complex { .. } => format!(
                        "{},{},nan,nan,{},complex",
                        fmt_f64(k),
                        fmt_f64(branch.omega),
                        fmt_f64(disc)
                    ),
                }
            }
            Err(WaveError::NoSolution { .. }) => {
                format!("{},nan,nan,nan,nan,no_solution", fmt_f64(k))
            }
            Err(e) => return Err(e.into()),
        };
        csv.push_str(&row);
        csv.push('\n');
    }
    files.push(("dispersion.csv".into(), csv));
    derived.insert("rows".into(), json!(dc.n_k));
    derived.insert("solved".into(), json!(solved));
    Ok(())
}

fn build_configured_mode(
    p: &ModelParams,
    k: f64,
    omega: Option<f64>,
    kind: ModeKindConfig,
    lambdas: Option<[f64; 2]>,
) -> Result<WaveMode, ScenarioError> {
    let omega = match omega {
        Some(w) => w,
        None => wave::dispersion_solve(p, k)?.omega,
    };
    let spec = match kind {
        ModeKindConfig::SingleDecay => ModeSpec::SingleDecay,
        ModeKindConfig::GrowthPair => ModeSpec::GrowthPair,
        ModeKindConfig::General => {
            let l = lambdas.ok_or(ScenarioError::BadSection {
                section: "mode",
                message: "general kind requires `lambdas: [lambda2, lambda4]`".into(),
            })?;
            ModeSpec::General {
                lambda2: l[0],
                lambda4: l[1],
            }
        }
    };
    Ok(wave::build_mode(p, k, omega, spec)?)
}

fn mode_derived(mode: &WaveMode) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("k".into(), json!(mode.k));
    m.insert("omega".into(), json!(mode.omega));
    m.insert("s1".into(), json!(mode.s1));
    m.insert("s2".into(), json!(mode.s2));
    m.insert("lambdas".into(), json!(mode.lambdas.to_vec()));
    m.insert("boundary_slope".into(), json!(mode.s_target));
    m.insert("kind".into(), json!(mode.kind.name()));
    m
}

fn run_mode(
    config: &ScenarioConfig,
    files: &mut Vec<(String, String)>,
    derived: &mut Map<String, Value>,
) -> Result<(), ScenarioError> {
    let mc = config.mode.as_ref().expect("command checked");
    let p = &config.params;
    let mode = build_configured_mode(p, mc.k, mc.omega, mc.kind, mc.lambdas)?;
    let n = mc.n_samples.max(2);
    let mut csv = String::from("y,f\n");
    for i in 0..n {
        let y = p.x_max * i as f64 / (n - 1) as f64;
        let f = mode.profile(y - p.x_max);
        let _ = writeln!(csv, "{},{}", fmt_f64(y), fmt_f64(f));
    }
    files.push(("mode_profile.csv".into(), csv));

    let mut params_csv =
        String::from("k,omega,s1,s2,lambda1,lambda2,lambda3,lambda4,boundary_slope,kind\n");
    let _ = writeln!(
        params_csv,
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(mode.k),
        fmt_f64(mode.omega),
        fmt_f64(mode.s1),
        fmt_f64(mode.s2),
        fmt_f64(mode.lambdas[0]),
        fmt_f64(mode.lambdas[1]),
        fmt_f64(mode.lambdas[2]),
        fmt_f64(mode.lambdas[3]),
        fmt_f64(mode.s_target),
        mode.kind.name()
    );
    files.push(("mode_params.csv".into(), params_csv));
    derived.extend(mode_derived(&mode));
    Ok(())
}

fn run_simulate(
    config: &ScenarioConfig,
    files: &mut Vec<(String, String)>,
    derived: &mut Map<String, Value>,
) -> Result<(), ScenarioError> {
    let sim = config.simulate.as_ref().expect("command checked");
    let p = &config.params;

    let seeded_mode = match &sim.seed_mode {
        Some(sm) => Some((
            build_configured_mode(p, sm.k, sm.omega, sm.kind, sm.lambdas)?,
            sm.amplitude,
            sm.x_periods,
        )),
        None => None,
    };
    let l_x = match (sim.l_x, &seeded_mode) {
        (Some(l), _) => l,
        (None, Some((mode, _, periods))) => 2.0 * std::f64::consts::PI * *periods as f64 / mode.k,
        (None, None) => p.x_max,
    };
    let options = SolverOptions {
        sponge: sim.sponge,
        ..SolverOptions::default()
    };
    let mut state = solver::init_grid_with(p, sim.n_x, sim.n_y, l_x, options)?;
    match (&seeded_mode, &sim.seed_pulse) {
        (Some((mode, amplitude, _)), None) => state.seed_analytic_mode(mode, *amplitude)?,
        (None, Some(pulse)) => state.seed_pulse(
            (pulse.center[0], pulse.center[1]),
            pulse.width,
            pulse.amplitude,
        ),
        _ => unreachable!("parse_config enforces exactly one seed"),
    }

    let dt = sim.dt_factor * state.cfl_max_dt();
    let mut snapshots = String::from("t,xi,yi,phi,psi,A,B\n");
    let mut surface = String::from("t,xi,xi_elev\n");
    let mut diagnostics = String::from("t,res_A,res_B,energy,max_amp\n");
    let surface_defined = p.h_y != 0.0;

    let emit = |state: &solver::SolverState,
                snapshots: &mut String,
                surface: &mut String,
                diagnostics: &mut String|
     -> Result<(), ScenarioError> {
        let (a, b) = state.reconstruct_fields();
        for i in 0..=state.n_x {
            for j in 0..=state.n_y {
                let _ = writeln!(
                    snapshots,
                    "{},{i},{j},{},{},{},{}",
                    fmt_f64(state.t),
                    fmt_f64(state.phi[(i, j)]),
                    fmt_f64(state.psi[(i, j)]),
                    fmt_f64(a[(i, j)]),
                    fmt_f64(b[(i, j)])
                );
            }
        }
        if surface_defined {
            for (i, xi) in state.surface_trace()?.into_iter().enumerate() {
                let _ = writeln!(surface, "{},{i},{}", fmt_f64(state.t), fmt_f64(xi));
            }
        }
        if state.step_count >= 2 {
            let d = state.diagnostics()?;
            let _ = writeln!(
                diagnostics,
                "{},{},{},{},{}",
                fmt_f64(state.t),
                fmt_f64(d.residual_a),
                fmt_f64(d.residual_b),
                fmt_f64(d.quad_energy),
                fmt_f64(d.max_amplitude)
            );
        }
        Ok(())
    };

    emit(&state, &mut snapshots, &mut surface, &mut diagnostics)?;
    for step in 1..=sim.n_steps {
        state.step(dt)?;
        if step % sim.snapshot_every == 0 || step == sim.n_steps {
            emit(&state, &mut snapshots, &mut surface, &mut diagnostics)?;
        }
    }

    files.push(("snapshots.csv".into(), snapshots));
    if surface_defined {
        files.push(("surface.csv".into(), surface));
    }
    files.push(("diagnostics.csv".into(), diagnostics));
    derived.insert("dt".into(), json!(dt));
    derived.insert("cfl_max_dt".into(), json!(state.cfl_max_dt()));
    derived.insert("l_x".into(), json!(l_x));
    derived.insert("t_end".into(), json!(state.t));
    derived.insert(
        "boundary_conditions".into(),
        json!("periodic-x, Robin surface at y=X, Dirichlet bottom"),
    );
    derived.insert("surface_trace".into(), json!(surface_defined));
    if let Some((mode, _, _)) = seeded_mode {
        derived.insert("seed_mode".into(), Value::Object(mode_derived(&mode)));
    }
    Ok(())
}

fn run_aggregate(
    config: &ScenarioConfig,
    files: &mut Vec<(String, String)>,
    derived: &mut Map<String, Value>,
) -> Result<(), ScenarioError> {
    let agg = config.aggregate.as_ref().expect("command checked");
    let p = &config.params;
    let events: Vec<TransactionEvent> = match (&agg.events_path, agg.synth_m) {
        (Some(path), None) => {
            let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
                path: path.clone(),
                source,
            })?;
            aggregate::read_events_csv(std::io::BufReader::new(file))?
        }
        (None, Some(m)) => synth_events(p, m, config.rng_seed)?,
        _ => unreachable!("parse_config enforces exactly one source"),
    };
    let grid =
        aggregate::aggregate_transactions_partitioned(&events, agg.n_cells, p.x_max, worker_cap())?;

    let mut grid_csv = Vec::new();
    grid.write_csv(&mut grid_csv).expect("in-memory write");
    files.push((
        "grid.csv".into(),
        String::from_utf8(grid_csv).expect("csv is utf-8"),
    ));

    let mut out_csv = String::from("xi,marginal_out\n");
    for (i, v) in grid.marginal_out().into_iter().enumerate() {
        let _ = writeln!(out_csv, "{i},{}", fmt_f64(v));
    }
    files.push(("marginal_out.csv".into(), out_csv));

    let mut in_csv = String::from("yi,marginal_in\n");
    for (j, v) in grid.marginal_in().into_iter().enumerate() {
        let _ = writeln!(in_csv, "{j},{}", fmt_f64(v));
    }
    files.push(("marginal_in.csv".into(), in_csv));

    let total_amount: f64 = events.iter().map(|e| e.amount).sum();
    derived.insert("n_events".into(), json!(events.len()));
    derived.insert("total_amount".into(), json!(total_amount));
    derived.insert("grand_total".into(), json!(grid.grand_total()));
    derived.insert("workers".into(), json!(worker_cap()));
    Ok(())
}
