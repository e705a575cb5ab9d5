//! `netuq`: runs the composite-function and heat-network benchmarks and
//! writes their tables.

mod config;
mod error;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    ConfigFile, ExperimentConfig, IntermediateChoice, OutputFormat, Overrides, Problem, RankMode,
    ReduceChoice,
};
use error::{CliError, CliResult};
use runner::{RunResult, Tables};

/// Environment variable that sets the worker thread count.
const THREADS_VAR: &str = "NETUQ_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "netuq",
    version,
    about = "Reduced-quadrature uncertainty propagation benchmarks"
)]
struct Cli {
    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for result tables and the manifest.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full versus reduced projection of the composite function.
    Composite(CompositeArgs),
    /// Full versus reduced Galerkin solves of the heat network.
    HeatNetwork(HeatNetworkArgs),
    /// Run the problem named in the configuration file.
    Run,
}

#[derive(Debug, Args)]
struct CompositeArgs {
    /// Number of random inputs.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Reduced degree; defaults to each sweep degree.
    #[arg(long)]
    n_prime: Option<usize>,
    /// Relative pivot tolerance of the constraint QR.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    rank_mode: Option<RankMode>,
    /// Degree of the reference projection used for the error columns.
    #[arg(long)]
    reference_degree: Option<usize>,
    /// Keep the first modified quadrature even when its orthogonality check fails.
    #[arg(long)]
    no_retry: bool,
}

#[derive(Debug, Args)]
struct HeatNetworkArgs {
    #[arg(long)]
    s_min: Option<usize>,
    #[arg(long)]
    s_max: Option<usize>,
    /// Galerkin degree.
    #[arg(long)]
    n: Option<usize>,
    /// Reduced degree; defaults to the Galerkin degree.
    #[arg(long)]
    n_prime: Option<usize>,
    /// Relative pivot tolerance of the constraint QR.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    reduce_which: Option<ReduceChoice>,
    /// Intermediate variables of each reduced component.
    #[arg(long, value_enum)]
    intermediate: Option<IntermediateChoice>,
    /// Residual tolerance of the Galerkin Newton iteration.
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Monte Carlo samples drawn for each `s` as a check on the Galerkin moments; 0 skips it.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_retry: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let config = resolve_config(&cli)?;
    log::info!("resolved configuration: {config:?}");
    let result = runner::run(&config)?;
    let files = output::write_outputs(&config, &result)?;
    print_summary(&result);
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads = value
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::config(format!(
                "{THREADS_VAR} must be a positive integer, got '{value}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))
}

fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut flags = Overrides {
        output: cli.output.clone(),
        format: cli.format,
        ..Overrides::default()
    };
    let problem = match &cli.command {
        Command::Composite(args) => {
            flags.s = args.s;
            flags.n_min = args.n_min;
            flags.n_max = args.n_max;
            flags.n_prime = args.n_prime;
            flags.qr_tol = args.tol;
            flags.rank_mode = args.rank_mode;
            flags.reference_degree = args.reference_degree;
            flags.retry = args.no_retry.then_some(false);
            Some(Problem::Composite)
        }
        Command::HeatNetwork(args) => {
            flags.s_min = args.s_min;
            flags.s_max = args.s_max;
            flags.n = args.n;
            flags.n_prime = args.n_prime;
            flags.qr_tol = args.tol;
            flags.reduce_which = args.reduce_which;
            flags.intermediate = args.intermediate;
            flags.newton_tol = args.newton_tol;
            flags.mc_samples = args.mc_samples;
            flags.seed = args.seed;
            flags.retry = args.no_retry.then_some(false);
            Some(Problem::HeatNetwork)
        }
        Command::Run => {
            if cli.config.is_none() {
                return Err(CliError::config("run needs --config"));
            }
            None
        }
    };
    config::resolve(problem, &file, &flags)
}

fn print_summary(result: &RunResult) {
    match &result.tables {
        Tables::Composite(rows) => {
            println!(
                "{:>3} {:>6} {:>8} {:>4} {:>5} {:>11} {:>11} {:>10}",
                "N", "P+1", "Q+1", "P'+1", "R", "err_full", "err_reduced", "orth_err"
            );
            for r in rows {
                println!(
                    "{:>3} {:>6} {:>8} {:>4} {:>5} {:>11.3e} {:>11.3e} {:>10.2e}",
                    r.degree,
                    r.basis_size,
                    r.grid_size,
                    r.reduced_size,
                    r.nonzeros,
                    r.err_full,
                    r.err_reduced,
                    r.orth_err
                );
            }
        }
        Tables::HeatNetwork { rows, monte_carlo } => {
            println!(
                "{:>2} {:>5} {:>6} {:>4} {:>4} {:>9} {:>9} {:>9} {:>9}",
                "s", "P+1", "Q+1", "P'+1", "R", "solves_c1", "solves_c2", "time_c1", "time_c2"
            );
            for r in rows {
                println!(
                    "{:>2} {:>5} {:>6} {:>4} {:>4} {:>9} {:>9} {:>9.3} {:>9.3}",
                    r.s,
                    r.basis_size,
                    r.grid_size,
                    r.reduced_size,
                    r.nonzeros,
                    r.solves_c1,
                    r.solves_c2,
                    r.time_c1,
                    r.time_c2
                );
            }
            for m in monte_carlo {
                println!(
                    "s={} Monte Carlo ({} samples): mean {:.6} ± {:.1e} (Galerkin {:.6}), sd {:.6} ± {:.1e} (Galerkin {:.6})",
                    m.s,
                    m.samples,
                    m.mc_mean,
                    m.mc_mean_se,
                    m.galerkin_mean,
                    m.mc_std_dev,
                    m.mc_std_dev_se,
                    m.galerkin_std_dev
                );
            }
        }
    }
    println!("total {:.2}s", result.total_seconds);
}
