//! Experiment driver behind the `boussinesq` binary.
//!
//! One JSON config per run, CSV tables out (17 significant digits), and a
//! JSON manifest holding the fully resolved config so a run can be repeated
//! by passing the manifest back as `--config`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::asymptotics::{
    amplitude_a2, phase_shift_k2, phase_shift_k4, soliton_asymptote, DeltaTable, SolitonAsymptote,
};
use crate::error::{Error, Result};
use crate::integrator::{normalize_snapshots, reconstruct, simulate_with, uniform_points};
use crate::scattering::{
    find_k0, norming_constant, scattering_matrix, NormingConstant, PotentialSampler, RootSearch,
    ScatteringOptions, NORMING_SPREAD_TOLERANCE,
};
use crate::scheme::{prepare_initial_state, Antiderivative, SchemeConfig, SpectralState};
use crate::spectral::{PeriodicGrid, PhysicalField, ProductMethod};
use crate::waves::{linf_error, InitialProfile, PeakWindow, ERROR_SAMPLES};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST_KIND: &str = "boussinesq-manifest";

#[derive(Debug, Parser)]
#[command(
    name = "boussinesq",
    version,
    about = "Damped spectral solver for the bad Boussinesq equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March the initial data and write one CSV per snapshot.
    Simulate(CommonArgs),
    /// Tabulate the sup-norm error against the configured reference.
    ErrorTable(CommonArgs),
    /// Tabulate s(k) and r1(k); optionally locate k0 and c_k0.
    Scattering(CommonArgs),
    /// Tabulate A2, the phase shifts and the soliton asymptote over a zeta grid.
    Asymptotics(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::ErrorTable(_) => "error-table",
            Command::Scattering(_) => "scattering",
            Command::Asymptotics(_) => "asymptotics",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::ErrorTable(a)
            | Command::Scattering(a)
            | Command::Asymptotics(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 1 gives bitwise-reproducible output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Recorded in the manifest; only randomized self-tests consume it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Scheme parameters; anything left out takes the library default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub half_period: f64,
    #[serde(default)]
    pub t_final: f64,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub d0: Option<f64>,
    #[serde(default)]
    pub ramp_width: Option<usize>,
    #[serde(default)]
    pub damping: Option<bool>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub product: Option<ProductMethod>,
    #[serde(default)]
    pub antiderivative: Option<Antiderivative>,
}

impl SchemeSection {
    pub fn resolve(&self) -> Result<SchemeConfig> {
        let mut c = SchemeConfig::new(self.half_period, self.t_final)?;
        if let Some(n) = self.modes {
            c = c.with_modes(n);
        }
        if let Some(v) = self.d0 {
            c.d0 = v;
        }
        if let Some(v) = self.ramp_width {
            c.ramp_width = v;
        }
        if let Some(v) = self.damping {
            c.damping = v;
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.product {
            c.product = v;
        }
        if let Some(v) = self.antiderivative {
            c.antiderivative = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn from_config(c: &SchemeConfig) -> Self {
        Self {
            half_period: c.half_period,
            t_final: c.t_final,
            modes: Some(c.modes),
            d0: Some(c.d0),
            ramp_width: Some(c.ramp_width),
            damping: Some(c.damping),
            dt: Some(c.dt),
            product: Some(c.product),
            antiderivative: Some(c.antiderivative),
        }
    }
}

/// A catalog profile, or `{"kind": "samples-file", "path": ...}`: a CSV with
/// header `x,u0,u1` and one row per grid point `x_j = j L/N`, `j = -N..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Profile(InitialProfile),
    SamplesFile { path: PathBuf },
}

impl<'de> Deserialize<'de> for InitialData {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Samples {
            #[allow(dead_code)]
            kind: String,
            path: PathBuf,
        }
        let v = serde_json::Value::deserialize(d)?;
        if v.get("kind").and_then(|k| k.as_str()) == Some("samples-file") {
            let s: Samples = serde_json::from_value(v).map_err(D::Error::custom)?;
            Ok(InitialData::SamplesFile { path: s.path })
        } else {
            serde_json::from_value(v)
                .map(InitialData::Profile)
                .map_err(D::Error::custom)
        }
    }
}

impl Serialize for InitialData {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InitialData::Profile(p) => p.serialize(s),
            InitialData::SamplesFile { path } => {
                serde_json::json!({ "kind": "samples-file", "path": path }).serialize(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    ExactSoliton,
    #[serde(rename = "u_sol")]
    USol,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Snapshot CSV grid; defaults to `[-L, L)`.
    #[serde(default)]
    pub grid_lo: Option<f64>,
    #[serde(default)]
    pub grid_hi: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_error_samples")]
    pub error_samples: usize,
    /// Sup-norm window; defaults to the whole period for `exact-soliton`
    /// and to `[1.001 t, 2 t]` for `u_sol`.
    #[serde(default)]
    pub error_window: Option<PeakWindow>,
}

fn default_grid_points() -> usize {
    2048
}

fn default_error_samples() -> usize {
    ERROR_SAMPLES
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            grid_lo: None,
            grid_hi: None,
            grid_points: default_grid_points(),
            error_samples: default_error_samples(),
            error_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringSection {
    /// Points `[re, im]` at which to tabulate `s(k)`.
    #[serde(default)]
    pub k: Vec<[f64; 2]>,
    /// Search for zeros of `s11` here; asymptotics falls back to `[1.01, 4]`.
    #[serde(default)]
    pub root_interval: Option<[f64; 2]>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_refine")]
    pub refine_tolerance: Option<f64>,
    #[serde(default = "default_refinements")]
    pub max_refinements: usize,
    /// Compute `c_k0` for each zero found.
    #[serde(default = "default_true")]
    pub norming: bool,
}

fn default_step() -> f64 {
    0.05
}

fn default_refine() -> Option<f64> {
    Some(1e-8)
}

fn default_refinements() -> usize {
    3
}

fn default_true() -> bool {
    true
}

impl Default for ScatteringSection {
    fn default() -> Self {
        Self {
            k: Vec::new(),
            root_interval: None,
            step: default_step(),
            refine_tolerance: default_refine(),
            max_refinements: default_refinements(),
            norming: true,
        }
    }
}

impl ScatteringSection {
    fn options(&self) -> ScatteringOptions {
        ScatteringOptions {
            step: self.step,
            refine_tolerance: self.refine_tolerance,
            max_refinements: self.max_refinements,
            ..ScatteringOptions::default()
        }
    }
}

const DEFAULT_ROOT_INTERVAL: [f64; 2] = [1.01, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ZetaRange {
    fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.stop >= self.start) {
            return Err(Error::config(
                "asymptotics.zeta_range",
                "need step > 0 and stop >= start",
            ));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSection {
    #[serde(default)]
    pub zeta: Vec<f64>,
    #[serde(default)]
    pub zeta_range: Option<ZetaRange>,
    /// Angle of the contour endpoint `k1 = e^{i theta}`; needed whenever a soliton is present.
    #[serde(default)]
    pub k1_angle: Option<f64>,
    /// Gauss-Legendre nodes per quarter arc of the `delta` contour.
    #[serde(default = "default_delta_nodes")]
    pub delta_nodes: usize,
    /// Times at which to export `u_sol` on the output grid.
    #[serde(default)]
    pub usol_times: Vec<f64>,
}

fn default_delta_nodes() -> usize {
    128
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            zeta: Vec::new(),
            zeta_range: None,
            k1_angle: None,
            delta_nodes: default_delta_nodes(),
            usol_times: Vec::new(),
        }
    }
}

/// Versioned run configuration; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub scheme: SchemeSection,
    pub initial: InitialData,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Adds snapshots at every multiple of this up to `t_final`.
    #[serde(default)]
    pub snapshot_every: Option<f64>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub scattering: ScatteringSection,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
}

impl RunConfig {
    /// Parse a config or the `config` field of a manifest. Relative sample
    /// paths are taken relative to `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let v = if v.get("kind").and_then(|k| k.as_str()) == Some(MANIFEST_KIND) {
            v.get("config")
                .cloned()
                .ok_or_else(|| Error::config("config", "manifest has no config field"))?
        } else {
            v
        };
        let mut cfg: RunConfig = serde_json::from_value(v)?;
        if cfg.version != SCHEMA_VERSION {
            return Err(Error::config(
                "version",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    cfg.version
                ),
            ));
        }
        if let (InitialData::SamplesFile { path }, Some(base)) = (&mut cfg.initial, base) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::config("--config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text, path.parent())
    }

    /// Check every section and fill all defaults in, as recorded in the manifest.
    pub fn resolved(&self) -> Result<Self> {
        let scheme = self.scheme.resolve()?;
        if let InitialData::Profile(p) = &self.initial {
            p.validate()?;
        }
        let l = scheme.half_period;
        let mut out = self.clone();
        out.scheme = SchemeSection::from_config(&scheme);
        if let InitialData::SamplesFile { .. } = self.initial {
            match self.scheme.antiderivative {
                None => out.scheme.antiderivative = Some(Antiderivative::Spectral),
                Some(Antiderivative::Exact) => {
                    return Err(Error::config(
                        "scheme.antiderivative",
                        "sampled data has no closed-form v0; use spectral or trapezoid",
                    ))
                }
                Some(_) => {}
            }
        }
        out.output.grid_lo = Some(self.output.grid_lo.unwrap_or(-l));
        out.output.grid_hi = Some(self.output.grid_hi.unwrap_or(l));
        if out.output.grid_points == 0 {
            return Err(Error::config("output.grid_points", "must be positive"));
        }
        if out.output.error_samples == 0 {
            return Err(Error::config("output.error_samples", "must be positive"));
        }
        if let Some(every) = self.snapshot_every {
            if !(every > 0.0 && every.is_finite()) {
                return Err(Error::config("snapshot_every", "must be positive"));
            }
        }
        if let Some(th) = self.asymptotics.k1_angle {
            if !th.is_finite() {
                return Err(Error::config("asymptotics.k1_angle", "must be finite"));
            }
        }
        if !(self.scattering.step > 0.0) {
            return Err(Error::config("scattering.step", "must be positive"));
        }
        Ok(out)
    }

    /// Call on a [`resolved`](Self::resolved) config.
    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        self.scheme.resolve()
    }

    /// Snapshot times, including `snapshot_every` multiples and `t_final`.
    pub fn snapshots(&self) -> Result<Vec<f64>> {
        let t_final = self.scheme.t_final;
        let mut times = self.snapshot_times.clone();
        if let Some(every) = self.snapshot_every {
            let n = (t_final / every + 1e-9).floor() as usize;
            times.extend((0..=n).map(|i| i as f64 * every).filter(|&t| t <= t_final));
        }
        normalize_snapshots(&times, t_final)
    }

    fn output_points(&self) -> Vec<f64> {
        let l = self.scheme.half_period;
        uniform_points(
            self.output.grid_lo.unwrap_or(-l),
            self.output.grid_hi.unwrap_or(l),
            self.output.grid_points,
        )
    }

    pub fn initial_state(
        &self,
        grid: PeriodicGrid,
        method: Antiderivative,
    ) -> Result<SpectralState> {
        match &self.initial {
            InitialData::Profile(p) => p.initial_state(grid, method),
            InitialData::SamplesFile { path } => {
                let (u0, u1) = read_samples(path, grid)?;
                prepare_initial_state(&u0, &u1, method)
            }
        }
    }

    pub fn potential(&self) -> Result<PotentialSampler> {
        match &self.initial {
            InitialData::Profile(p) => Ok(PotentialSampler::from_profile(p)),
            InitialData::SamplesFile { .. } => {
                let scheme = self.scheme_config()?;
                let grid = scheme.grid()?;
                let state = self.initial_state(grid, scheme.antiderivative)?;
                PotentialSampler::from_state(&state, grid)
            }
        }
    }
}

fn read_samples(path: &Path, grid: PeriodicGrid) -> Result<(PhysicalField, PhysicalField)> {
    let field = "initial.path";
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(field, format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header != ["x", "u0", "u1"] {
        return Err(Error::config(field, "header must be x,u0,u1"));
    }
    let points = grid.points();
    let (mut u0, mut u1) = (Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(field, format!("row {}: {e}", row + 1)))?;
        if vals.len() != 3 {
            return Err(Error::config(
                field,
                format!("row {}: expected 3 columns", row + 1),
            ));
        }
        let Some(&x) = points.get(row) else {
            return Err(Error::config(
                field,
                format!("more than {} rows", points.len()),
            ));
        };
        if (vals[0] - x).abs() > 1e-9 * grid.half_period() {
            return Err(Error::config(
                field,
                format!("row {}: x = {} but the grid point is {x}", row + 1, vals[0]),
            ));
        }
        u0.push(vals[1]);
        u1.push(vals[2]);
    }
    if u0.len() != points.len() {
        return Err(Error::config(
            field,
            format!("expected {} rows, found {}", points.len(), u0.len()),
        ));
    }
    Ok((PhysicalField::new(grid, u0)?, PhysicalField::new(grid, u1)?))
}

/// Full-precision, locale-independent number formatting.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Write a CSV with the given header; every line ends in `\n`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    f.flush()?;
    Ok(())
}

fn profile_rows(xs: &[f64], us: &[f64]) -> Vec<Vec<String>> {
    xs.iter()
        .zip(us)
        .map(|(x, u)| vec![fmt_num(*x), fmt_num(*u)])
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub kind: &'static str,
    pub schema_version: u32,
    pub crate_version: &'static str,
    pub command: String,
    pub status: String,
    pub threads: usize,
    pub seed: u64,
    pub config: RunConfig,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
}

struct Run {
    out: PathBuf,
    manifest: Manifest,
    clock: Instant,
}

impl Run {
    fn new(command: &str, args: &CommonArgs, config: RunConfig) -> Result<Self> {
        fs::create_dir_all(&args.out)?;
        Ok(Self {
            out: args.out.clone(),
            manifest: Manifest {
                kind: MANIFEST_KIND,
                schema_version: SCHEMA_VERSION,
                crate_version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                status: "running".into(),
                threads: rayon::current_num_threads(),
                seed: args.seed,
                config,
                timings: BTreeMap::new(),
                outputs: Vec::new(),
                diagnostics: serde_json::Map::new(),
            },
            clock: Instant::now(),
        })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_csv(&self.out.join(name), header, rows)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.diagnostics.insert(key.to_string(), v);
    }

    fn lap(&mut self, phase: &str) {
        let dt = self.clock.elapsed().as_secs_f64();
        self.manifest.timings.insert(phase.to_string(), dt);
        self.clock = Instant::now();
    }

    fn finish(mut self, result: Result<()>) -> Result<()> {
        self.manifest.status = match &result {
            Ok(()) => "ok".into(),
            Err(Error::BlowUp { .. }) => "blow-up".into(),
            Err(e) => format!("error: {e}"),
        };
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.out.join("manifest.json"), text + "\n")?;
        result
    }
}

/// Parse arguments, run, and map the outcome to a process exit code.
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
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::MissingPrerequisite(_) = e {
                eprintln!(
                    "hint: the endpoint k1 of the delta contour is not fixed by the data; \
                     set asymptotics.k1_angle"
                );
            }
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        // Fails only if a pool already exists, e.g. when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let config = RunConfig::load(&args.config)?.resolved()?;
    let mut run = Run::new(cli.command.name(), args, config.clone())?;
    let result = match cli.command {
        Command::Simulate(_) => cmd_simulate(&config, &mut run),
        Command::ErrorTable(_) => cmd_error_table(&config, &mut run),
        Command::Scattering(_) => cmd_scattering(&config, &mut run),
        Command::Asymptotics(_) => cmd_asymptotics(&config, &mut run),
    };
    run.finish(result)
}

fn cmd_simulate(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let scheme = cfg.scheme_config()?;
    let grid = scheme.grid()?;
    let initial = cfg.initial_state(grid, scheme.antiderivative)?;
    let times = cfg.snapshots()?;
    let xs = cfg.output_points();
    run.lap("setup");
    let mut index = 0usize;
    let mut written = Vec::new();
    let res = simulate_with(&scheme, &initial, &times, |state| {
        let name = format!("snapshot_{index:04}.csv");
        let us = reconstruct(state, grid, &xs);
        write_csv(&run.out.join(&name), &["x", "U"], &profile_rows(&xs, &us))?;
        written.push((name, state.t));
        index += 1;
        Ok(())
    });
    run.lap("march");
    let times_written: Vec<f64> = written.iter().map(|w| w.1).collect();
    run.manifest
        .outputs
        .extend(written.into_iter().map(|w| w.0));
    run.note("snapshot_times", &times_written);
    if let Err(Error::BlowUp { time, last_finite }) = &res {
        let us = reconstruct(last_finite, grid, &xs);
        run.csv(
            "blowup_last_finite.csv",
            &["x", "U"],
            &profile_rows(&xs, &us),
        )?;
        run.note("blow_up_time", time);
        run.note("last_finite_time", last_finite.t);
    }
    res
}

/// Solitonless data yields `None`.
fn soliton_chain(
    cfg: &RunConfig,
    p: &PotentialSampler,
    run: &mut Run,
) -> Result<Option<SolitonAsymptote>> {
    let [a, b] = cfg
        .scattering
        .root_interval
        .unwrap_or(DEFAULT_ROOT_INTERVAL);
    let step = cfg.scattering.step;
    let k0 = match find_k0(p, (a, b), step)? {
        RootSearch::Solitonless => {
            run.note("root_search", "solitonless");
            return Ok(None);
        }
        RootSearch::Zeros { zeros } => {
            run.note("root_search", &zeros);
            zeros[0]
        }
    };
    let Some(theta) = cfg.asymptotics.k1_angle else {
        return Err(Error::MissingPrerequisite(format!(
            "the data has a soliton (k0 = {k0}) so u_sol needs delta, whose contour \
             endpoint k1 is not determined by the scattering data; supply asymptotics.k1_angle"
        )));
    };
    let c = norming_constant(k0, p, step, NORMING_SPREAD_TOLERANCE)?;
    run.note("norming_constant", &c);
    let opts = cfg.scattering.options();
    let table = DeltaTable::build(
        p,
        C::from_polar(1.0, theta),
        cfg.asymptotics.delta_nodes,
        &opts,
    )?;
    run.note("delta_max_log", table.max_log());
    let sol = soliton_asymptote(k0, c.value, &table)?;
    run.note("soliton", sol);
    run.lap("soliton_chain");
    Ok(Some(sol))
}

fn cmd_error_table(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let scheme = cfg.scheme_config()?;
    let grid = scheme.grid()?;
    let l = grid.half_period();
    type RefFn = Box<dyn Fn(f64, f64) -> f64 + Sync>;
    let (reference, window): (RefFn, PeakWindow) = match cfg.reference {
        Reference::None => {
            return Err(Error::config(
                "reference",
                "error-table needs exact-soliton or u_sol",
            ))
        }
        Reference::ExactSoliton => {
            let InitialData::Profile(p) = &cfg.initial else {
                return Err(Error::config(
                    "reference",
                    "exact-soliton needs soliton initial data",
                ));
            };
            let sol = p.exact_soliton().ok_or_else(|| {
                Error::config("reference", "exact-soliton needs soliton initial data")
            })?;
            (
                Box::new(move |x, t| sol.value(x, t)),
                PeakWindow::Fixed { lo: -l, hi: l },
            )
        }
        Reference::USol => {
            let p = cfg.potential()?;
            let f: RefFn = match soliton_chain(cfg, &p, run)? {
                Some(sol) => Box::new(move |x, t| sol.value(x, t)),
                None => Box::new(|_, _| 0.0),
            };
            (
                f,
                PeakWindow::Similarity {
                    zeta_lo: 1.001,
                    zeta_hi: 2.0,
                },
            )
        }
    };
    let window = cfg.output.error_window.unwrap_or(window);
    let initial = cfg.initial_state(grid, scheme.antiderivative)?;
    let times = cfg.snapshots()?;
    run.lap("setup");
    let n = cfg.output.error_samples;
    let mut rows = Vec::new();
    let res = simulate_with(&scheme, &initial, &times, |state| {
        let t = state.t;
        let (lo, hi) = window.bounds(t, grid);
        let e = if hi > lo {
            linf_error(state, grid, |x| reference(x, t), (lo, hi), n)
        } else {
            f64::NAN
        };
        let log_scaled = if t > 1.0 { t / t.ln() * e } else { f64::NAN };
        rows.push(vec![
            fmt_num(t),
            fmt_num(e),
            fmt_num(log_scaled),
            fmt_num(t.sqrt() * e),
        ]);
        Ok(())
    });
    run.lap("march");
    run.csv(
        "error_table.csv",
        &["t", "e", "t_over_ln_t_e", "sqrt_t_e"],
        &rows,
    )?;
    if let Err(Error::BlowUp { time, last_finite }) = &res {
        let xs = cfg.output_points();
        let us = reconstruct(last_finite, grid, &xs);
        run.csv(
            "blowup_last_finite.csv",
            &["x", "U"],
            &profile_rows(&xs, &us),
        )?;
        run.note("blow_up_time", time);
    }
    res
}

fn complex_cells(c: Option<C>) -> [String; 2] {
    match c {
        Some(c) => [fmt_num(c.re), fmt_num(c.im)],
        None => [fmt_num(f64::NAN), fmt_num(f64::NAN)],
    }
}

fn cmd_scattering(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let p = cfg.potential()?;
    let opts = cfg.scattering.options();
    run.note("truncation_radius", p.radius());
    run.lap("setup");
    let mut header = vec!["k_re".to_string(), "k_im".to_string()];
    for i in 1..=3 {
        for j in 1..=3 {
            header.push(format!("s{i}{j}_re"));
            header.push(format!("s{i}{j}_im"));
        }
    }
    header.extend(["r1_re", "r1_im", "residual", "status"].map(String::from));
    let mut rows = Vec::new();
    let mut failures = serde_json::Map::new();
    for &[re, im] in &cfg.scattering.k {
        let k = C::new(re, im);
        let mut row = vec![fmt_num(re), fmt_num(im)];
        match scattering_matrix(k, &p, &opts) {
            Ok(res) => {
                for i in 0..3 {
                    for j in 0..3 {
                        row.extend(complex_cells(Some(res.s[(i, j)])));
                    }
                }
                row.extend(complex_cells(res.r1));
                row.push(fmt_num(res.diagnostics.residual.unwrap_or(f64::NAN)));
                let status = if res.diagnostics.failures.is_empty() {
                    "ok"
                } else {
                    "partial"
                };
                row.push(status.into());
                if !res.diagnostics.failures.is_empty() {
                    failures.insert(format!("{k}"), serde_json::json!(res.diagnostics.failures));
                }
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(fmt_num(f64::NAN), 21));
                row.push("error".into());
                failures.insert(format!("{k}"), serde_json::json!([e.to_string()]));
            }
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv("scattering.csv", &header, &rows)?;
    run.note("failures", failures);
    run.lap("table");

    if let Some([a, b]) = cfg.scattering.root_interval {
        let mut roots = Vec::new();
        match find_k0(&p, (a, b), cfg.scattering.step)? {
            RootSearch::Solitonless => {
                roots.push(vec![
                    "solitonless".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
            RootSearch::Zeros { zeros } => {
                for k0 in zeros {
                    let c: Option<NormingConstant> = if cfg.scattering.norming {
                        Some(norming_constant(
                            k0,
                            &p,
                            cfg.scattering.step,
                            NORMING_SPREAD_TOLERANCE,
                        )?)
                    } else {
                        None
                    };
                    let [c_re, c_im] = complex_cells(c.as_ref().map(|c| c.value));
                    roots.push(vec![
                        "zero".into(),
                        fmt_num(k0),
                        fmt_num(crate::asymptotics::soliton_amplitude(k0)),
                        fmt_num(crate::asymptotics::soliton_speed(k0)),
                        c_re,
                        c_im,
                        fmt_num(c.map_or(f64::NAN, |c| c.spread)),
                    ]);
                }
            }
        }
        run.csv(
            "roots.csv",
            &["status", "k0", "a0", "c0", "c_re", "c_im", "spread"],
            &roots,
        )?;
        run.lap("roots");
    }
    Ok(())
}

fn cmd_asymptotics(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let p = cfg.potential()?;
    let mut zetas = cfg.asymptotics.zeta.clone();
    if let Some(r) = cfg.asymptotics.zeta_range {
        zetas.extend(r.values()?);
    }
    run.lap("setup");
    let sol = soliton_chain(cfg, &p, run)?;
    let k0 = sol.map(|s| s.k0);
    let opts = cfg.scattering.options();
    let mut rows = Vec::new();
    let mut failures = serde_json::Map::new();
    for &zeta in &zetas {
        let a2 = amplitude_a2(zeta, &p, &opts);
        let ph2 = phase_shift_k2(zeta, k0);
        let ph4 = phase_shift_k4(zeta, k0);
        let mut errs = Vec::new();
        let (nu, a2v, clipped) = match a2 {
            Ok(a) => (a.nu_hat, a.a2, if a.clipped { 1.0 } else { 0.0 }),
            Err(e) => {
                errs.push(format!("A2: {e}"));
                (f64::NAN, f64::NAN, f64::NAN)
            }
        };
        let mut take = |r: Result<f64>, what: &str| {
            r.unwrap_or_else(|e| {
                errs.push(format!("{what}: {e}"));
                f64::NAN
            })
        };
        let ph2 = take(ph2, "phase_k2");
        let ph4 = take(ph4, "phase_k4");
        if !errs.is_empty() {
            failures.insert(fmt_num(zeta), serde_json::json!(errs));
        }
        let (a0, c0, ln_f) = sol.map_or((0.0, f64::NAN, f64::NAN), |s| (s.a0, s.c0, s.ln_f));
        rows.push(
            [zeta, nu, a2v, clipped, ph2, ph4, a0, c0, ln_f]
                .iter()
                .map(|v| fmt_num(*v))
                .collect(),
        );
    }
    run.csv(
        "asymptotics.csv",
        &[
            "zeta",
            "nu_hat",
            "a2",
            "nu_clipped",
            "phase_k2",
            "phase_k4",
            "a0",
            "c0",
            "ln_f",
        ],
        &rows,
    )?;
    run.note("failures", failures);
    run.lap("sweep");
    let xs = cfg.output_points();
    for (i, &t) in cfg.asymptotics.usol_times.iter().enumerate() {
        let us: Vec<f64> = xs
            .iter()
            .map(|&x| sol.map_or(0.0, |s| s.value(x, t)))
            .collect();
        run.csv(
            &format!("usol_{i:04}.csv"),
            &["x", "u_sol"],
            &profile_rows(&xs, &us),
        )?;
    }
    Ok(())
}
