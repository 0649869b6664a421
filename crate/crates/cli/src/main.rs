use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stt_cli::commands::{cmd_plot, cmd_run, cmd_simulate, cmd_synth, cmd_verify};
use stt_cli::{configure_workers, parse_seeds, CliResult};

/// Spatiotemporal tube synthesis and funnel-controlled closed-loop simulation.
#[derive(Parser)]
#[command(name = "stt", version)]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a certified tube for every mission segment.
    Synth {
        /// Scenario document.
        #[arg(long)]
        scenario: PathBuf,
        /// Output tube document.
        #[arg(long, default_value = "tube.json")]
        out: PathBuf,
        /// Override the scenario's sampling radius.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Check the tube conditions on a dense time grid.
    Verify {
        /// Tube document written by `synth`.
        #[arg(long)]
        tube: PathBuf,
        /// Scenario document.
        #[arg(long)]
        scenario: PathBuf,
        /// Grid points per segment; ten times the sample count by default.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run the closed loop for each seed and write traces and verdicts.
    Simulate {
        /// Tube document written by `synth`.
        #[arg(long)]
        tube: PathBuf,
        /// Scenario document.
        #[arg(long)]
        scenario: PathBuf,
        /// Seed list such as `1,2,3` or `0..20`; the scenario's seeds by default.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render the scene and the error funnels as SVG.
    Plot {
        /// Tube document written by `synth`.
        #[arg(long)]
        tube: PathBuf,
        /// Scenario document.
        #[arg(long)]
        scenario: PathBuf,
        /// Scene image; the error plot goes next to it as `<stem>_errors.svg`.
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
        /// Trace files produced by `simulate`.
        traces: Vec<PathBuf>,
    },
    /// Synthesize, verify, simulate and plot in one go.
    Run {
        /// Scenario document.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for the tube, traces, verdicts and plots.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Seed list such as `1,2,3` or `0..20`; the scenario's seeds by default.
        #[arg(long)]
        seeds: Option<String>,
        /// Override the scenario's sampling radius.
        #[arg(long)]
        eps: Option<f64>,
        /// Dense verification grid points per segment.
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_workers()?;
    let quiet = cli.quiet;
    let seeds = |s: &Option<String>| s.as_deref().map(parse_seeds).transpose();
    match cli.command {
        Command::Synth { scenario, out, eps } => cmd_synth(&scenario, &out, eps, quiet),
        Command::Verify { tube, scenario, grid } => cmd_verify(&tube, &scenario, grid, quiet),
        Command::Simulate {
            tube,
            scenario,
            seeds: s,
            out,
        } => cmd_simulate(&tube, &scenario, seeds(&s)?.as_deref(), &out, quiet),
        Command::Plot {
            tube,
            scenario,
            out,
            traces,
        } => cmd_plot(&traces, &tube, &scenario, &out, quiet),
        Command::Run {
            scenario,
            out,
            seeds: s,
            eps,
            grid,
        } => cmd_run(&scenario, &out, seeds(&s)?.as_deref(), eps, grid, quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status.code() as u8)
        }
    }
}
