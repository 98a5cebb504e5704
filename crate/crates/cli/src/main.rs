mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};
use config::{Method, RunConfig};

#[derive(Parser)]
#[command(
    name = "warpbank",
    version,
    about = "Warped non-uniform DFT filter bank design and evaluation"
)]
struct Cli {
    /// JSON run configuration; defaults apply to missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed, overriding sim.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points per band for the analysis design, overriding design.grid_n.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band edges after warping and decimation.
    Bands,
    /// Analysis and synthesis prototype design.
    Design,
    /// Per-band SAR and overall transfer of existing coefficients.
    Evaluate {
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[arg(long)]
        synthesis: Option<PathBuf>,
    },
    /// Subband echo-canceller ERLE run.
    Simulate {
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[arg(long)]
        synthesis: Option<PathBuf>,
        /// Far-end signal (.f64 little-endian or CSV) instead of sim.signal.
        #[arg(long)]
        signal_file: Option<PathBuf>,
    },
    /// ERLE of the proposed design against the widest-band baseline.
    Compare {
        #[arg(long)]
        signal_file: Option<PathBuf>,
    },
    /// Acceptance checks against the reference designs.
    Reproduce {
        /// Criterion numbers or groups: tables, design, properties, simulation.
        #[arg(long)]
        only: Option<String>,
        /// Directory with replacement reference coefficient CSVs.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the reference coefficients to this directory and exit.
        #[arg(long)]
        export_reference: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("WARPBANK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(format!(
            "WARPBANK_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn context(cli: &Cli) -> Result<Context, Failure> {
    let (mut config, base) = match &cli.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(PathBuf::from).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(out) = &cli.out {
        config.output.directory = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    if let Some(grid) = cli.grid {
        config.design.grid_n = grid;
    }
    if let Some(method) = cli.method {
        config.design.method = method;
    }
    Ok(Context { config, base })
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let ctx = context(&cli)?;
    match &cli.command {
        Command::Bands => commands::bands(&ctx),
        Command::Design => commands::design(&ctx),
        Command::Evaluate {
            analysis,
            synthesis,
        } => commands::evaluate(&ctx, analysis.as_deref(), synthesis.as_deref()),
        Command::Simulate {
            analysis,
            synthesis,
            signal_file,
        } => commands::simulate(
            &ctx,
            analysis.as_deref(),
            synthesis.as_deref(),
            signal_file.as_deref(),
        ),
        Command::Compare { signal_file } => commands::compare(&ctx, signal_file.as_deref()),
        Command::Reproduce {
            only,
            reference,
            export_reference,
        } => commands::reproduce(
            &ctx,
            only.as_deref(),
            reference.as_deref(),
            export_reference.as_deref(),
            cli.seed,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
