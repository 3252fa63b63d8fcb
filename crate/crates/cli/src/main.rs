//! `canopy`: per-tree crown, height and biovolume inventories from crown/shadow
//! label masks, plus segmentation scoring and synthetic test scenes.
//!
//! Exit codes: 0 success (warnings allowed), 1 usage error, 2 input or
//! validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "canopy", version, about = "Crown/shadow mask analytics for UAV orchard imagery")]
struct Cli {
    /// JSON file with run settings; explicit flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solar elevation, azimuth and zenith for --timestamp at --lat/--lon
    Solar,
    /// Measure crown area, shadow length, height and biovolume per tree
    Measure {
        /// Label PNG, or a directory of label PNGs
        input: PathBuf,
        /// Metadata sidecar [default: input with a .json extension]
        #[arg(long, value_name = "PATH")]
        sidecar: Option<PathBuf>,
        /// Output file; required directory in directory mode
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = InventoryFormat::Csv)]
        format: InventoryFormat,
    },
    /// Score a predicted label mask against ground truth
    Eval {
        /// Predicted label PNG, or a directory of them
        pred: PathBuf,
        /// Ground-truth label PNG, or a directory with matching file names
        gt: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// Threshold an RGB image on HSV value into a 0/255 shadow mask
    Shadowmask {
        rgb: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Render a random synthetic orchard scene with its metadata and ground truth
    Synth {
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scene width in meters
        #[arg(long, default_value_t = 40.0)]
        width_m: f64,
        /// Scene height in meters
        #[arg(long, default_value_t = 40.0)]
        height_m: f64,
        /// Base file name for the outputs
        #[arg(long, default_value = "scene")]
        name: String,
    },
    /// Shuffle a list of paths into train/val/test lists
    Split {
        /// Newline-delimited list file
        list: PathBuf,
        /// Output directory for train.txt, val.txt and test.txt
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Train, validation and test fractions
        #[arg(long, value_parser = parse_ratios, default_value = "0.7,0.2,0.1")]
        ratios: (f64, f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InventoryFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three comma-separated fractions, got {}", parts.len())),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => Overrides::load(path)?,
        None => Overrides::default(),
    };
    let cfg = RunConfig::resolve(cli.overrides.over(file))?;
    match cli.command {
        Command::Solar => commands::solar(&cfg),
        Command::Measure { input, sidecar, out, format } => {
            commands::measure(&cfg, &input, sidecar.as_deref(), out.as_deref(), format == InventoryFormat::Json)
        }
        Command::Eval { pred, gt, out, format } => {
            commands::eval(&cfg, &pred, &gt, out.as_deref(), format == ReportFormat::Table)
        }
        Command::Shadowmask { rgb, out } => commands::shadowmask(&cfg, &rgb, &out),
        Command::Synth { out, trees, seed, width_m, height_m, name } => {
            commands::synth(&cfg, &out, trees, seed, (width_m, height_m), &name)
        }
        Command::Split { list, out, ratios, seed } => commands::split(&list, &out, ratios, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
