use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nervereg_cli::config::RunConfig;
use nervereg_cli::cv::{run_cv, write_cv, CvGrid};
use nervereg_cli::diagnose::run_diagnose;
use nervereg_cli::fit::{resolve_paths, run_fit};
use nervereg_cli::simulate::{simulate, SimParams};
use nervereg_cli::{CliError, CliResult};

/// Geometry-adaptive regression on kNN nerve complexes.
///
/// Exit codes: 0 success (also when refinement hits max_iters; see the
/// report's `converged` flag), 2 input error, 3 configuration error,
/// 4 numeric failure. NERVEREG_THREADS sets the worker thread count.
#[derive(Parser)]
#[command(name = "nervereg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write fitted values, trace and state files.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate k, gamma and the damping factor.
    Cv {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export plot data from a fit directory.
    Diagnose {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the canonical configuration with every default filled in.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { config, input, out } => {
            let cfg = load_config(config.as_ref())?;
            let paths = resolve_paths(&cfg, input, out)?;
            let report = run_fit(&cfg, &paths)?;
            if report.converged {
                log::info!("converged after {} iterations", report.iterations);
            } else {
                eprintln!("warning: no convergence within {} iterations", report.iterations);
            }
        }
        Command::Cv { config, grid, input, out } => {
            let cfg = load_config(config.as_ref())?;
            let input = input
                .or_else(|| cfg.input.clone())
                .ok_or_else(|| CliError::Config("no input file given".into()))?;
            let result = run_cv(&cfg, &CvGrid::load(&grid)?, &input)?;
            write_cv(&result, &out)?;
            let s = &result.selected;
            println!("k={} gamma={} beta_damp_factor={} cv_error={:.6e}", s.k, s.gamma, s.beta_damp_factor, s.mean_error);
        }
        Command::Simulate { kind, n, d, noise, seed, out } => {
            simulate(&kind, &SimParams { n, d, noise, seed })?.write(&out)?;
        }
        Command::Diagnose { fit, out } => {
            run_diagnose(&fit, &out)?;
        }
        Command::Config { config } => {
            println!("{}", load_config(config.as_ref())?.to_canonical_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var("NERVEREG_THREADS") {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: NERVEREG_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(3);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
