mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use report::Report;

/// Risk-neutral pricing for variable annuities with GMWB riders.
#[derive(Parser, Debug)]
#[command(name = "gmwb", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Override the engine seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the engine path count.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Override the engine steps per year.
    #[arg(long, global = true)]
    steps: Option<u32>,

    /// Cap the worker thread count (default: GMWB_THREADS or all cores).
    /// Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Strip volatile fields (timestamps, durations) for golden-file
    /// comparison.
    #[arg(long, global = true)]
    canonical: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value both perspectives and the decomposition V = W + U.
    Price {
        /// Also dump every growth factor, path-major little-endian f64.
        #[arg(long, value_name = "FILE")]
        export_paths: Option<PathBuf>,
        /// Also export one simulated account path as CSV.
        #[arg(long, value_name = "FILE")]
        export_account: Option<PathBuf>,
        /// Which path the CSV export follows.
        #[arg(long, default_value_t = 0)]
        account_index: usize,
    },
    /// Solve for the fee rate that makes V0 equal the premium.
    FairFee,
    /// Fit a surrender policy and price the contract with lapses.
    LapseValue {
        /// Persist the fitted policy as JSON for reuse.
        #[arg(long, value_name = "FILE")]
        save_policy: Option<PathBuf>,
        /// Price under a previously fitted policy instead of refitting.
        #[arg(long, value_name = "FILE")]
        load_policy: Option<PathBuf>,
    },
    /// Export the fitted exercise boundary as CSV.
    Boundary {
        /// Reuse a previously fitted policy instead of refitting.
        #[arg(long, value_name = "FILE")]
        load_policy: Option<PathBuf>,
    },
    /// Estimate the probability the account survives to maturity.
    RuinProb,
    /// Estimate v(t, w) and u(t, w) over a grid of restart points.
    Surface,
    /// Closed-form or lattice reference values (no Monte Carlo).
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let config_path = match &cli.config {
        Some(path) => path.clone(),
        None => {
            eprintln!("error: --config <FILE> is required");
            return ExitCode::from(2);
        }
    };
    let mut config = match RunConfig::load(&config_path) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: invalid configuration: {err:#}");
            return ExitCode::from(2);
        }
    };
    config.apply_overrides(cli.seed, cli.paths, cli.steps);

    let threads = cli.threads.or_else(|| {
        std::env::var("GMWB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let run = || report::run(&cli.command, &config, cli.canonical);
    let outcome = match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(err) => {
                eprintln!("error: could not build thread pool: {err}");
                return ExitCode::from(2);
            }
        },
        _ => run(),
    };

    match outcome {
        Ok(report) => {
            if let Err(err) = emit(&report, &cli.output) {
                eprintln!("error: could not write output: {err}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(report::RunError::Config(message)) => {
            eprintln!("error: invalid configuration: {message}");
            ExitCode::from(2)
        }
        Err(report::RunError::Numerical { kind, message }) => {
            let diagnostics = serde_json::json!({
                "error": message,
                "kind": kind,
            });
            let rendered = serde_json::to_string_pretty(&diagnostics).unwrap();
            if emit_text(&rendered, &cli.output).is_err() {
                eprintln!("{rendered}");
            }
            ExitCode::from(3)
        }
    }
}

fn emit(report: &Report, output: &Option<PathBuf>) -> std::io::Result<()> {
    match report {
        Report::Json(value) => {
            let mut text = serde_json::to_string_pretty(value).expect("report serializes");
            text.push('\n');
            emit_text(&text, output)
        }
        Report::Csv(text) => emit_text(text, output),
    }
}

fn emit_text(text: &str, output: &Option<PathBuf>) -> std::io::Result<()> {
    match output {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
