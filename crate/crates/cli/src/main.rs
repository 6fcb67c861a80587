use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermobeam_cli::{cmd_check, cmd_fit, cmd_run, cmd_spectrum, cmd_verify, parse_window};

/// Simulate and verify a damped thermoelastic Timoshenko beam with memory.
#[derive(Parser)]
#[command(name = "thermobeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and write energy.csv and manifest.txt.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run even if the kernel or friction hypotheses fail.
        #[arg(long)]
        override_hypotheses: bool,
    },
    /// Eigenvalues of the discrete generator into spectrum.csv.
    Spectrum {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        override_hypotheses: bool,
    },
    /// Fit an exponential decay to the E column of an energy CSV.
    Fit {
        csv: PathBuf,
        /// Fit window `t_lo:t_hi` (default: the last 60% of the record).
        #[arg(long)]
        window: Option<String>,
    },
    /// Report the kernel, friction and Lyapunov-weight hypotheses.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            override_hypotheses,
        } => cmd_run(config.as_deref(), &out, override_hypotheses, &mut stdout),
        Command::Spectrum { config, out } => cmd_spectrum(config.as_deref(), &out, &mut stdout),
        Command::Verify {
            config,
            override_hypotheses,
        } => cmd_verify(config.as_deref(), override_hypotheses, &mut stdout),
        Command::Fit { csv, window } => match window.as_deref().map(parse_window).transpose() {
            Ok(w) => cmd_fit(&csv, w, &mut stdout),
            Err(e) => {
                eprintln!("error: {e}");
                thermobeam_cli::EXIT_FAILURE
            }
        },
        Command::Check { config } => cmd_check(config.as_deref(), &mut stdout),
    };
    ExitCode::from(code as u8)
}
