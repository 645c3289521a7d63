use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grassproj::commands::{self, ConstructArgs, DimArgs};
use grassproj::{init_threads, CliError, Outcome};
use grassproj_core::consts::DEFAULT_MAX_GRID_BYTES;

/// Projections of line families onto k-planes: constructions, dimension
/// estimates and incidence experiments.
#[derive(Parser)]
#[command(name = "grassproj", version)]
struct Cli {
    /// Worker threads (default: all cores). GRASSPROJ_THREADS overrides.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest grid field, in bytes, that highlow may allocate.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_GRID_BYTES)]
    max_grid_bytes: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Box dimension of a point cloud JSON; prints slope ± stderr and writes the ladder CSV.
    Dim {
        input: PathBuf,
        /// Space tag overriding the cloud's own, e.g. `euclidean(1)`, `grassmannian(2,4)`.
        #[arg(long)]
        metric: Option<String>,
        /// `i_min:i_max` (dyadic) or `base:i_min:i_max`.
        #[arg(long)]
        scales: Option<String>,
        /// Ladder CSV path (default: `<input>.ladder.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write a gnuplot `.dat` ladder.
        #[arg(long)]
        dat: Option<PathBuf>,
    },
    /// Build a construction (bush, product, fractal) as a point cloud JSON.
    Construct {
        name: String,
        /// Generator arguments as key=value, e.g. `n=3 a=2`.
        args: Vec<String>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Projected-dimension scan over sampled planes (TOML config).
    Scan {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// High-low decomposition check on the line chart grid (TOML config).
    Highlow {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Slab incidence or squared-multiplicity slope experiment (TOML config).
    Incidence {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    init_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Dim {
            input,
            metric,
            scales,
            csv,
            dat,
        } => commands::cmd_dim(&DimArgs {
            input,
            metric,
            scales,
            csv,
            dat,
        })
        .map(|r| r.1),
        Cmd::Construct {
            name,
            args,
            delta,
            seed,
            output,
        } => commands::cmd_construct(&ConstructArgs {
            name,
            args,
            delta,
            seed,
            output,
        }),
        Cmd::Scan { config, out } => commands::cmd_scan(&config, out.as_deref()).map(|r| r.1),
        Cmd::Highlow { config, out } => {
            commands::cmd_highlow(&config, out.as_deref(), cli.max_grid_bytes).map(|r| r.1)
        }
        Cmd::Incidence { config, out } => {
            commands::cmd_incidence(&config, out.as_deref()).map(|r| r.1)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("grassproj: {e}");
            ExitCode::from(e.code())
        }
    }
}
