use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zerodelay::commands;
use zerodelay::{CliError, ExperimentConfig, Result};

/// Zero-delay coding experiments: train, evaluate and inspect encoders.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contraction coefficients, invariant law and state counts.
    Inspect { config: PathBuf },
    /// Run Q-learning for each N and write checkpoints.
    Train {
        config: PathBuf,
        /// Train only this N.
        #[arg(long)]
        n: Option<usize>,
        /// Exit 0 even if some run hit max_steps before converging.
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// Roll out trained checkpoints and append CSV rows.
    Eval {
        config: PathBuf,
        /// Defaults to the checkpoints `train` writes for each N.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
    },
    /// Memoryless and best-single-quantizer baselines.
    Baseline { config: PathBuf },
    /// Paired predictors from two priors against the contraction envelope.
    Stability {
        config: PathBuf,
        #[arg(long, default_value = "delta:0")]
        mu: String,
        #[arg(long, default_value = "uniform")]
        nu: String,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo estimate of the window approximation error.
    LossEstimate {
        config: PathBuf,
        #[arg(long, default_value_t = 5_000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 16)]
        policies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Inspect { config } => {
            print!("{}", commands::inspect(&ExperimentConfig::load(&config)?)?);
        }
        Command::Train {
            config,
            n,
            allow_unconverged,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let reports = commands::train(&cfg, n)?;
            for r in &reports {
                println!("N={} {} -> {}", r.n, r.summary, r.checkpoint.display());
            }
            let stalled: Vec<String> = reports
                .iter()
                .filter(|r| !r.converged)
                .map(|r| r.n.to_string())
                .collect();
            if !stalled.is_empty() && !allow_unconverged {
                return Err(CliError::NonConvergence(format!(
                    "no convergence within max_steps for N = {}",
                    stalled.join(", ")
                )));
            }
        }
        Command::Eval {
            config,
            checkpoints,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (path, rows) = commands::eval(&cfg, &checkpoints)?;
            for r in &rows {
                println!(
                    "N={} seed={} avg={:.6} fallback={:.4}",
                    r.n.unwrap_or(0),
                    r.seed,
                    r.avg_distortion,
                    r.fallback_rate
                );
            }
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Baseline { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (path, rows) = commands::baseline(&cfg)?;
            for r in &rows {
                println!("{} seed={} avg={:.6}", r.scheme, r.seed, r.avg_distortion);
            }
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Stability {
            config,
            mu,
            nu,
            horizon,
            samples,
            seed,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let r = commands::stability(&cfg, &mu, &nu, horizon, samples, seed)?;
            println!("alpha {:.6}", r.alpha);
            println!("t\tmean_tv\tstd_error\tenvelope");
            for t in 0..r.mean.len() {
                println!(
                    "{t}\t{:.6e}\t{:.3e}\t{:.6e}",
                    r.mean[t], r.std_error[t], r.envelope[t]
                );
            }
        }
        Command::LossEstimate {
            config,
            samples,
            horizon,
            policies,
            seed,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("N\tt\testimate\tstd_error\tmax_sample\tbound");
            for est in commands::loss(&cfg, samples, horizon, policies, seed)? {
                for p in &est.points {
                    println!(
                        "{}\t{}\t{:.6e}\t{:.3e}\t{:.6e}\t{:.6e}",
                        est.n, p.t, p.estimate, p.std_error, p.max_sample, est.bound
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
