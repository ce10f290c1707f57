use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flexchain::scenario::{load_config, run, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "flexchain",
    version,
    about = "Simulate serial chains of flexible links"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the scenario and write the trajectory CSV and summary JSON.
    Simulate(Common),
    /// Report conditioning and constraint consistency at the initial state.
    Check(Common),
    /// Print the modal frequencies of every link.
    Modes(Common),
    /// Run the property and oracle suites.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the integrator step (s).
    #[arg(long)]
    step: Option<f64>,
    /// Override the end time (s).
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Seed for randomized suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLEXCHAIN_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Modes(a) => (Command::Modes, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        out: args.out,
        step: args.step,
        t_end: args.t_end,
        seed: args.seed,
    };
    log::info!("running {:?} on {}", command, args.config.display());
    match run(command, &config, &opts) {
        Ok(report) => {
            print!("{}", report.stdout);
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
