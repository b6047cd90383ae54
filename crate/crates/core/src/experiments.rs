//! Monte Carlo experiments: scene configuration, baseline schemes, parameter
//! sweeps, result files and beam-focusing heatmaps.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    path_gain, receiver_position, to_cartesian, AntennaLayout, ChannelModel, MovingRegion, Point3, PolarPoint,
    ReceiverGeometry, Role,
};
use crate::hybrid::{HybridOptions, MoOptions};
use crate::linalg::{CMatrix, CVector, C64};
use crate::position::MmOptions;
use crate::scene::Scene;
use crate::solver::{initialize_layout, solve_from, Architecture, LayoutMode, SolveConfig, SolveResult};
use crate::wmmse::WmmseOptions;

/// `P[W] = 10^((P[dBm] − 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Receiver array center in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    /// Meters from the origin.
    pub distance: f64,
    /// Azimuth in radians.
    pub azimuth: f64,
    /// Elevation from the `z` axis in radians; `π/2` is the horizontal plane.
    #[serde(default = "horizontal")]
    pub elevation: f64,
}

fn horizontal() -> f64 {
    std::f64::consts::FRAC_PI_2
}

impl ReceiverSpec {
    pub fn in_plane(distance: f64, azimuth: f64) -> Self {
        Self { distance, azimuth, elevation: horizontal() }
    }

    fn polar(&self) -> PolarPoint {
        PolarPoint::new(self.distance, self.azimuth, self.elevation)
    }
}

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub outer_tol: f64,
    pub max_outer: usize,
    pub wmmse_tol: f64,
    pub wmmse_max_iters: usize,
    pub hybrid_tol: f64,
    pub hybrid_max_outer: usize,
    pub mo_grad_tol: f64,
    pub mo_max_iters: usize,
    pub mm_tol: f64,
    pub mm_max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let c = SolveConfig::default();
        Self {
            outer_tol: c.tol,
            max_outer: c.max_outer,
            wmmse_tol: c.wmmse.tol,
            wmmse_max_iters: c.wmmse.max_iters,
            hybrid_tol: c.hybrid.tol,
            hybrid_max_outer: c.hybrid.max_outer,
            mo_grad_tol: c.hybrid.mo.grad_tol,
            mo_max_iters: c.hybrid.mo.max_iters,
            mm_tol: c.mm.tol,
            mm_max_iters: c.mm.max_iters,
        }
    }
}

impl SolverSettings {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            tol: self.outer_tol,
            max_outer: self.max_outer,
            wmmse: WmmseOptions { tol: self.wmmse_tol, max_iters: self.wmmse_max_iters },
            hybrid: HybridOptions {
                tol: self.hybrid_tol,
                max_outer: self.hybrid_max_outer,
                mo: MoOptions { grad_tol: self.mo_grad_tol, max_iters: self.mo_max_iters, ..MoOptions::default() },
            },
            mm: MmOptions { tol: self.mm_tol, max_iters: self.mm_max_iters },
            ..SolveConfig::default()
        }
    }
}

/// Transmission and placement strategy being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Hybrid beamforming with optimized antenna positions.
    Proposed,
    /// Fully-digital beamforming with optimized positions.
    Fd,
    /// Random fixed positions, optimized hybrid beamformers.
    Rpa,
    /// Fixed lattice spanning the whole region.
    Fpaf,
    /// Fixed half-wavelength lattice.
    Fpah,
    /// Design under the far-field model, evaluation under the near field.
    Ff,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [Scheme::Proposed, Scheme::Fd, Scheme::Rpa, Scheme::Fpaf, Scheme::Fpah, Scheme::Ff];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Fd => "fd",
            Scheme::Rpa => "rpa",
            Scheme::Fpaf => "fpaf",
            Scheme::Fpah => "fpah",
            Scheme::Ff => "ff",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|x| x.label() == s).ok_or_else(|| {
            Error::Config(format!("unknown scheme '{s}' (expected proposed, fd, rpa, fpaf, fpah or ff)"))
        })
    }
}

/// Scene parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Eavesdropper distance in meters.
    EavDistance,
    /// Eavesdropper azimuth in radians.
    EavAzimuth,
    /// Region side in wavelengths.
    RegionSize,
    /// Power budget in dBm.
    Power,
    /// Number of transmit antennas.
    NumAntennas,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::EavDistance => "eav_distance",
            SweepAxis::EavAzimuth => "eav_azimuth",
            SweepAxis::RegionSize => "region_size",
            SweepAxis::Power => "power",
            SweepAxis::NumAntennas => "num_antennas",
        }
    }

    /// Current value of this axis in `config`.
    pub fn value(self, config: &ExperimentConfig) -> f64 {
        match self {
            SweepAxis::EavDistance => config.eavesdropper.distance,
            SweepAxis::EavAzimuth => config.eavesdropper.azimuth,
            SweepAxis::RegionSize => config.region_wavelengths,
            SweepAxis::Power => config.power_dbm,
            SweepAxis::NumAntennas => config.antennas as f64,
        }
    }

    pub fn apply(self, config: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::EavDistance => config.eavesdropper.distance = value,
            SweepAxis::EavAzimuth => config.eavesdropper.azimuth = value,
            SweepAxis::RegionSize => config.region_wavelengths = value,
            SweepAxis::Power => config.power_dbm = value,
            SweepAxis::NumAntennas => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("antenna count must be a positive integer, got {value}")));
                }
                config.antennas = value as usize;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::EavDistance, SweepAxis::EavAzimuth, SweepAxis::RegionSize, SweepAxis::Power, SweepAxis::NumAntennas]
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown sweep axis '{s}' (expected eav_distance, eav_azimuth, region_size, power or num_antennas)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Named starting points for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-size setup: 64 antennas in a 100λ square, 500 trials.
    Paper,
    /// Laptop-sized setup: 16 antennas in a 20λ square, 50 trials, two-element
    /// receivers.
    Desk,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset '{s}' (expected desk or paper)"))),
        }
    }
}

/// Everything needed to run an experiment. Units: meters, radians, dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub antennas: usize,
    pub rf_chains: usize,
    pub streams: usize,
    pub user_antennas: usize,
    pub eve_antennas: usize,
    /// Region side `A` in wavelengths.
    pub region_wavelengths: f64,
    pub wavelength: f64,
    /// Minimum antenna spacing in meters; half a wavelength when absent.
    pub min_spacing: Option<f64>,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub user: ReceiverSpec,
    pub eavesdropper: ReceiverSpec,
    pub eavesdropper_present: bool,
    pub schemes: Vec<Scheme>,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub seed: u64,
    /// Write measured wall time per trial; zero otherwise, which keeps output
    /// byte-for-byte reproducible.
    pub record_timing: bool,
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 64,
            rf_chains: 4,
            streams: 2,
            user_antennas: 4,
            eve_antennas: 4,
            region_wavelengths: 100.0,
            wavelength: 0.01,
            min_spacing: None,
            power_dbm: 20.0,
            noise_dbm: -80.0,
            user: ReceiverSpec::in_plane(15.0, std::f64::consts::FRAC_PI_4),
            eavesdropper: ReceiverSpec::in_plane(10.0, std::f64::consts::FRAC_PI_4),
            eavesdropper_present: true,
            schemes: vec![Scheme::Proposed],
            sweep: None,
            trials: 500,
            seed: 0,
            record_timing: true,
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::default(),
            Preset::Desk => Self {
                antennas: 16,
                region_wavelengths: 20.0,
                trials: 50,
                user_antennas: 2,
                eve_antennas: 2,
                ..Self::default()
            },
        }
    }

    /// Overlay the keys present in a JSON document onto `base`.
    pub fn overlay_json(base: &Self, text: &str) -> Result<Self> {
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if !patch.is_object() {
            return Err(Error::Config("configuration must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, patch);
        let config: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read a JSON configuration file on top of `base`.
    pub fn load(path: &Path, base: &Self) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::overlay_json(base, &text)
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing.unwrap_or(self.wavelength / 2.0)
    }

    pub fn region_side(&self) -> f64 {
        self.region_wavelengths * self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad("wavelength must be positive");
        }
        if !(self.region_wavelengths > 0.0 && self.region_wavelengths.is_finite()) {
            return bad("region size must be positive");
        }
        if !(self.min_spacing() > 0.0) {
            return bad("minimum spacing must be positive");
        }
        if !(self.power_dbm.is_finite() && self.noise_dbm.is_finite()) {
            return bad("power and noise levels must be finite");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required");
        }
        if self.user_antennas < 2 || self.eve_antennas < 2 {
            return bad("receivers need at least two antennas");
        }
        for spec in [&self.user, &self.eavesdropper] {
            if !(spec.distance > 0.0 && spec.distance.is_finite()) {
                return bad("receiver distances must be positive");
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad("sweep needs at least one value");
            }
            let mut probe = self.clone();
            for v in &sweep.values {
                sweep.axis.apply(&mut probe, *v)?;
            }
        }
        self.solver.solve_config().validate()
    }

    pub fn scene(&self) -> Result<Scene> {
        self.validate()?;
        let noise = dbm_to_watts(self.noise_dbm);
        let user =
            ReceiverGeometry::planar_array(Role::User, self.user.polar(), self.user_antennas, self.wavelength, noise)
                .map_err(as_config)?;
        let eavesdropper = ReceiverGeometry::planar_array(
            Role::Eavesdropper,
            self.eavesdropper.polar(),
            self.eve_antennas,
            self.wavelength,
            noise,
        )
        .map_err(as_config)?;
        let scene = Scene {
            region: MovingRegion::new(self.region_side()).map_err(as_config)?,
            min_spacing: self.min_spacing(),
            wavelength: self.wavelength,
            user,
            eavesdropper,
            eavesdropper_present: self.eavesdropper_present,
            power_budget: dbm_to_watts(self.power_dbm),
            antennas: self.antennas,
            rf_chains: self.rf_chains,
            streams: self.streams,
        };
        scene.validate()?;
        Ok(scene)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Geometry(msg) => Error::Config(msg),
        other => other,
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Independent random stream of one Monte Carlo trial. Every scheme and
/// sweep value sees the same stream for the same trial index.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub trial: usize,
    pub secrecy_bps_hz: f64,
    pub iterations: usize,
    pub seconds: f64,
}

/// Solve one trial of one scheme, returning the full solver output.
pub fn solve_scheme(config: &ExperimentConfig, scheme: Scheme, trial: usize) -> Result<SolveResult> {
    let scene = config.scene()?;
    let mut rng = trial_rng(config.seed, trial);
    let mut random = || -> Result<AntennaLayout> {
        initialize_layout(scene.antennas, &scene.region, scene.min_spacing, LayoutMode::Random, &mut rng)
    };
    let mut solve_config = config.solver.solve_config();
    solve_config.rng_seed = config.seed;
    let layout = match scheme {
        Scheme::Fpaf => {
            initialize_layout(scene.antennas, &scene.region, scene.min_spacing, LayoutMode::SpanningGrid, &mut rng)?
        }
        Scheme::Fpah => initialize_layout(
            scene.antennas,
            &scene.region,
            scene.min_spacing,
            LayoutMode::Grid { spacing: scene.wavelength / 2.0 },
            &mut rng,
        )?,
        _ => random()?,
    };
    match scheme {
        Scheme::Proposed => {}
        Scheme::Fd => solve_config.architecture = Architecture::FullyDigital,
        Scheme::Rpa | Scheme::Fpaf | Scheme::Fpah => solve_config.optimize_positions = false,
        Scheme::Ff => solve_config.design_model = ChannelModel::FarField,
    }
    solve_from(&scene, &layout, &solve_config)
}

/// Solve one trial and reduce it to a [`TrialRecord`].
pub fn run_scheme(config: &ExperimentConfig, scheme: Scheme, trial: usize, axis_value: f64) -> Result<TrialRecord> {
    let start = Instant::now();
    let result = solve_scheme(config, scheme, trial)?;
    Ok(TrialRecord {
        scheme,
        axis_value,
        trial,
        secrecy_bps_hz: result.rates.secrecy,
        iterations: result.iterations,
        seconds: if config.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
    })
}

/// Run every scheme for every trial and sweep value, in parallel over
/// (value, trial) pairs. Records come back ordered by value, scheme, trial.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let (axis, values) = match &config.sweep {
        Some(s) => (Some(s.axis), s.values.clone()),
        None => (None, vec![f64::NAN]),
    };
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let mut c = config.clone();
        let axis_value = match axis {
            Some(a) => {
                a.apply(&mut c, *v)?;
                *v
            }
            None => 0.0,
        };
        c.scene()?;
        configs.push((axis_value, c));
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|i| (0..config.trials).map(move |t| (i, t))).collect();
    let rows: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(i, trial)| {
            let (axis_value, c) = &configs[i];
            c.schemes.iter().map(|s| run_scheme(c, *s, trial, *axis_value)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<(usize, TrialRecord)> =
        jobs.iter().zip(rows).flat_map(|(&(i, _), rs)| rs.into_iter().map(move |r| (i, r))).collect();
    let order = |s: Scheme| config.schemes.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    records.sort_by_key(|(i, r)| (*i, order(r.scheme), r.trial));
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Aggregate statistics of one (scheme, value) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub trials: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub mean_iterations: f64,
    pub seconds: f64,
}

pub fn summarize(records: &[TrialRecord]) -> Vec<ExperimentRecord> {
    let mut out: Vec<ExperimentRecord> = Vec::new();
    let mut keys: Vec<(Scheme, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(s, v)| *s == r.scheme && v.to_bits() == r.axis_value.to_bits()) {
            keys.push((r.scheme, r.axis_value));
        }
    }
    for (scheme, value) in keys {
        let group: Vec<&TrialRecord> =
            records.iter().filter(|r| r.scheme == scheme && r.axis_value.to_bits() == value.to_bits()).collect();
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.secrecy_bps_hz).sum::<f64>() / n;
        let var = group.iter().map(|r| (r.secrecy_bps_hz - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        out.push(ExperimentRecord {
            scheme,
            axis_value: value,
            trials: group.len(),
            mean,
            std_dev: var.sqrt(),
            min: group.iter().map(|r| r.secrecy_bps_hz).fold(f64::INFINITY, f64::min),
            max: group.iter().map(|r| r.secrecy_bps_hz).fold(f64::NEG_INFINITY, f64::max),
            mean_iterations: group.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            seconds: group.iter().map(|r| r.seconds).sum(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

/// Significant digits kept in result files.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

impl TrialRecord {
    /// The record as it reads back from a result file.
    pub fn rounded(&self) -> Self {
        Self {
            axis_value: round_significant(self.axis_value),
            secrecy_bps_hz: round_significant(self.secrecy_bps_hz),
            seconds: round_significant(self.seconds),
            ..self.clone()
        }
    }
}

pub const CSV_HEADER: [&str; 6] = ["scheme", "axis_value", "trial", "secrecy_bps_hz", "iterations", "seconds"];

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Write records as CSV (LF line endings).
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let r = r.rounded();
        w.write_record([
            r.scheme.label().to_string(),
            r.axis_value.to_string(),
            r.trial.to_string(),
            r.secrecy_bps_hz.to_string(),
            r.iterations.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()
}

/// Write records as a JSON array with the same fields as the CSV.
pub fn write_json<W: Write>(records: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    let rounded: Vec<TrialRecord> = records.iter().map(TrialRecord::rounded).collect();
    serde_json::to_writer_pretty(&mut out, &rounded)?;
    out.write_all(b"\n")
}

pub fn emit(records: &[TrialRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    let mut buf = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(records, &mut buf),
        OutputFormat::Json => write_json(records, &mut buf),
    }
    .and_then(|_| buf.flush())
    .map_err(io_error(path))
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let field = |row: &csv::StringRecord, i: usize| row.get(i).unwrap_or_default().to_string();
    let parse_f = |s: String| s.parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}': {e}")));
    let parse_u = |s: String| s.parse::<usize>().map_err(|e| Error::Config(format!("bad integer '{s}': {e}")));
    reader
        .records()
        .map(|row| {
            let row = row.map_err(|e| Error::Config(e.to_string()))?;
            Ok(TrialRecord {
                scheme: field(&row, 0).parse()?,
                axis_value: parse_f(field(&row, 1))?,
                trial: parse_u(field(&row, 2))?,
                secrecy_bps_hz: parse_f(field(&row, 3))?,
                iterations: parse_u(field(&row, 4))?,
                seconds: parse_f(field(&row, 5))?,
            })
        })
        .collect()
}

/// Horizontal-plane grid `[x0, x1] × [y0, y1]` split into `res × res` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub res: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x0: 0.0, x1: 20.0, y0: 0.0, y1: 20.0, res: 200 }
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    /// `X0,X1,Y0,Y1,RES`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::Config(format!("grid must be X0,X1,Y0,Y1,RES, got '{s}'"));
        if parts.len() != 5 {
            return Err(bad());
        }
        let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        let grid = Self { x0: f(0)?, x1: f(1)?, y0: f(2)?, y1: f(3)?, res: parts[4].parse().map_err(|_| bad())? };
        grid.validate()?;
        Ok(grid)
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 || self.res == 0 {
            return Err(Error::Config(format!("degenerate heatmap grid {self:?}")));
        }
        Ok(())
    }

    /// Center of cell `(row, col)`; rows advance in `y`, columns in `x`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let dx = (self.x1 - self.x0) / self.res as f64;
        let dy = (self.y1 - self.y0) / self.res as f64;
        (self.x0 + (col as f64 + 0.5) * dx, self.y0 + (row as f64 + 0.5) * dy)
    }

    /// Cell containing the point `(x, y)`, if it lies inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x - self.x0) / (self.x1 - self.x0) * self.res as f64).floor();
        let row = ((y - self.y0) / (self.y1 - self.y0) * self.res as f64).floor();
        let n = self.res as f64;
        (col >= 0.0 && col < n && row >= 0.0 && row < n).then_some((row as usize, col as usize))
    }
}

/// Value written for cells where the probe coincides with an antenna.
pub const HEATMAP_SENTINEL: f64 = -1.0;

/// Normalized received power over a grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid.res + col]
    }

    /// Cell of the grid maximum.
    pub fn peak(&self) -> (usize, usize) {
        let i = self.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        (i / self.grid.res, i % self.grid.res)
    }

    /// Number of cells in the 4-connected region around the peak whose power
    /// is within 3 dB of it.
    pub fn main_lobe_cells(&self) -> usize {
        let n = self.grid.res;
        let mut seen = vec![false; n * n];
        let (r0, c0) = self.peak();
        let mut stack = vec![(r0, c0)];
        seen[r0 * n + c0] = true;
        let mut count = 0;
        while let Some((r, c)) = stack.pop() {
            count += 1;
            let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
            for (nr, nc) in neighbours {
                if nr < n && nc < n && !seen[nr * n + nc] && self.get(nr, nc) >= 0.5 {
                    seen[nr * n + nc] = true;
                    stack.push((nr, nc));
                }
            }
        }
        count
    }

    /// One line per grid row, comma separated, LF terminated.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.grid.res) {
            let line: Vec<String> = row.iter().map(|v| round_significant(*v).to_string()).collect();
            out.write_all(line.join(",").as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(io_error(path))?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_csv(&mut buf).and_then(|_| buf.flush()).map_err(io_error(path))
    }
}

/// Beam pattern `‖a(p)ᵀ V‖²` of a precoder over a horizontal grid, where
/// `a(p)` holds the near-field phases `exp(−j2π‖t_m − p‖/λ)` from every
/// antenna to the probe point `p`, normalized to a grid maximum of one.
///
/// The probe uses unit gains: with free-space `1/d` gains the pattern is
/// dominated by cells next to the array rather than by the focal spot.
pub fn beam_heatmap(layout: &AntennaLayout, precoder: &CMatrix, wavelength: f64, grid: &GridSpec) -> Result<Heatmap> {
    grid.validate()?;
    if precoder.nrows() != layout.len() {
        return Err(Error::Dimension("precoder rows must match the antenna count".into()));
    }
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let antennas: Vec<Point3> = (0..layout.len()).map(|m| to_cartesian(&layout.position(m))).collect();
    let n = grid.res;
    let mut values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let (x, y) = grid.cell_center(i / n, i % n);
            let p = Point3::new(x, y, 0.0);
            let mut a = CVector::zeros(antennas.len());
            for (m, t) in antennas.iter().enumerate() {
                if path_gain(t, &p, wavelength).is_err() {
                    return HEATMAP_SENTINEL;
                }
                a[m] = C64::from_polar(1.0, -k * (t - p).norm());
            }
            (a.transpose() * precoder).iter().map(|z| z.norm_sqr()).sum()
        })
        .collect();
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in values.iter_mut().filter(|v| **v >= 0.0) {
            *v /= peak;
        }
    }
    Ok(Heatmap { grid: *grid, values })
}

/// Solve trial 0 of the proposed scheme and map its beam pattern.
pub fn solved_heatmap(config: &ExperimentConfig, grid: &GridSpec) -> Result<(SolveResult, Heatmap)> {
    let result = solve_scheme(config, Scheme::Proposed, 0)?;
    let precoder =
        result.beamformers.effective().ok_or_else(|| Error::Dimension("solver produced no precoder".into()))?;
    let map = beam_heatmap(&result.layout, &precoder, config.wavelength, grid)?;
    Ok((result, map))
}

/// `(x, y)` of a receiver center, for locating it on a heatmap grid.
pub fn planar_point(spec: &ReceiverSpec) -> Result<(f64, f64)> {
    let p = receiver_position(&spec.polar())?;
    Ok((p.x, p.y))
}
