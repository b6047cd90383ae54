//! `masec` — run secrecy-rate experiments and beam-focusing heatmaps.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use masec::experiments::{
    emit, planar_point, solved_heatmap, summarize, sweep, write_csv, write_json, ExperimentConfig, GridSpec,
    OutputFormat, Preset, Scheme, Sweep, SweepAxis,
};
use masec::Error;

#[derive(Debug, Parser)]
#[command(name = "masec", version, about = "Movable-antenna secure beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo secrecy-rate runs, optionally sweeping one parameter.
    Run {
        /// JSON configuration; keys override the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scheme(s) to run, comma separated: proposed, fd, rpa, fpaf, fpah, ff.
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<String>,
        /// eav_distance, eav_azimuth, region_size, power or num_antennas.
        #[arg(long, requires = "values")]
        sweep: Option<String>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', requires = "sweep", allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// desk or paper (default: paper).
        #[arg(long)]
        preset: Option<String>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Solve one instance and write its normalized beam pattern.
    Heatmap {
        #[arg(long)]
        config: Option<PathBuf>,
        /// X0,X1,Y0,Y1,RES in meters and cells per side.
        #[arg(long, default_value = "0,20,0,20,200", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(preset: Option<&str>, path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    let preset: Preset = preset.unwrap_or("paper").parse()?;
    let base = ExperimentConfig::preset(preset);
    match path {
        Some(p) => ExperimentConfig::load(p, &base),
        None => Ok(base),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, scheme, sweep: axis, values, trials, seed, preset, out, format } => {
            let mut cfg = load_config(preset.as_deref(), config.as_ref())?;
            if !scheme.is_empty() {
                cfg.schemes = scheme.iter().map(|s| s.parse::<Scheme>()).collect::<Result<_, _>>()?;
            }
            if let Some(axis) = axis {
                cfg.sweep = Some(Sweep { axis: axis.parse::<SweepAxis>()?, values });
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let format: OutputFormat = format.parse()?;
            cfg.validate()?;
            let records = sweep(&cfg)?;
            for s in summarize(&records) {
                eprintln!(
                    "{:<9} value={:<10} trials={:<4} mean={:.4} std={:.4} bps/Hz",
                    s.scheme.label(),
                    s.axis_value,
                    s.trials,
                    s.mean,
                    s.std_dev
                );
            }
            match out {
                Some(path) => emit(&records, format, &path),
                None => {
                    let stdout = std::io::stdout().lock();
                    match format {
                        OutputFormat::Csv => write_csv(&records, stdout),
                        OutputFormat::Json => write_json(&records, stdout),
                    }
                    .map_err(|e| Error::Io { path: "<stdout>".into(), message: e.to_string() })
                }
            }
        }
        Command::Heatmap { config, grid, preset, out } => {
            let cfg = load_config(preset.as_deref(), config.as_ref())?;
            let grid: GridSpec = grid.parse()?;
            let (result, map) = solved_heatmap(&cfg, &grid)?;
            map.save(&out)?;
            let (row, col) = map.peak();
            let (px, py) = grid.cell_center(row, col);
            let (ux, uy) = planar_point(&cfg.user)?;
            eprintln!(
                "secrecy {:.4} bps/Hz; peak at ({px:.3}, {py:.3}) m, user at ({ux:.3}, {uy:.3}) m; main lobe {} cells",
                result.rates.secrecy,
                map.main_lobe_cells()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
