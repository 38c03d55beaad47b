use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uwa_chest::bench::{
    run_benchmark, run_estimate, run_simulate, run_sweep, ExperimentConfig, SweepParam,
};
use uwa_chest::metrics::SummaryRow;
use uwa_chest::{Result, SolverKind};

#[derive(Parser)]
#[command(name = "uwa-bench", version, about = "Sparse channel estimation under impulsive noise")]
struct Cli {
    /// Experiment config (TOML or JSON). Defaults to the bundled reference grid.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides BENCH_SEED and the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of trials; overrides the config.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Suppress progress and tables.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a probe, channel blocks and noise realizations.
    Simulate {
        #[arg(long, default_value_t = 20)]
        blocks: usize,
    },
    /// Estimate one channel block with one solver.
    Estimate {
        #[arg(long, default_value = "admm")]
        solver: SolverKind,
        /// Noise condition name; defaults to the first one.
        #[arg(long)]
        condition: Option<String>,
    },
    /// Run the full Monte-Carlo grid.
    Benchmark {
        /// Comma-separated subset of solvers.
        #[arg(long, value_delimiter = ',')]
        solver: Vec<SolverKind>,
    },
    /// Re-run the grid for several values of one parameter.
    Sweep {
        /// inr, snr, q, tau-factor or lambda-factor.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        solver: Vec<SolverKind>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Ok(s) = std::env::var("BENCH_SEED") {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| uwa_chest::Error::Config(format!("BENCH_SEED is not an integer: '{s}'")))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = cli.trials {
        cfg.n_trials = n;
    }
    Ok(cfg)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<12} {:<8} {:>7} {:>12} {:>10} {:>12} {:>10}",
        "condition", "solver", "trials", "nmsd_db", "iters", "runtime_s", "converged"
    );
    for r in rows {
        println!(
            "{:<12} {:<8} {:>7} {:>12.2} {:>10.1} {:>12.4} {:>10.2}",
            r.noise_condition,
            r.solver,
            r.n_trials,
            r.mean_nmsd_db,
            r.mean_iterations,
            r.mean_runtime_s,
            r.converged_fraction
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Simulate { blocks } => {
            let report = run_simulate(&cfg, *blocks)?;
            if !cli.quiet {
                for (c, measured) in report {
                    println!(
                        "{:<12} snr_db={:.2} inr_db={} sinr_db={:.3} noise_power={:.4e} (measured)",
                        c.noise_condition,
                        c.snr_db,
                        c.inr_db.map_or("-".to_string(), |v| format!("{v:.1}")),
                        c.sinr_db,
                        measured
                    );
                }
                println!("wrote probe.csv, channel_taps.csv, noise.csv to {}", cfg.output_dir.display());
            }
        }
        Command::Estimate { solver, condition } => {
            let r = run_estimate(&cfg, *solver, condition.as_deref())?;
            if !cli.quiet {
                println!(
                    "solver={} condition={} nmsd_db={:.3} iterations={} converged={}",
                    r.solver, r.noise_condition, r.nmsd_db, r.result.iterations, r.result.converged
                );
            }
        }
        Command::Benchmark { solver } => {
            if !solver.is_empty() {
                cfg.solvers = solver.clone();
            }
            if !cli.quiet {
                eprintln!(
                    "running {} trials x {} conditions x {} solvers",
                    cfg.n_trials,
                    cfg.noise.len(),
                    cfg.solvers.len()
                );
            }
            let (_, summary) = run_benchmark(&cfg)?;
            if !cli.quiet {
                print_summary(&summary);
                println!("artifacts in {}", cfg.output_dir.display());
            }
        }
        Command::Sweep { param, values, solver } => {
            if !solver.is_empty() {
                cfg.solvers = solver.clone();
            }
            let rows = run_sweep(&cfg, *param, values)?;
            if !cli.quiet {
                println!("{:<14} {:>10} {:<12} {:<8} {:>12}", "param", "value", "condition", "solver", "nmsd_db");
                for r in rows {
                    println!(
                        "{:<14} {:>10} {:<12} {:<8} {:>12.2}",
                        r.param, r.value, r.noise_condition, r.solver, r.mean_nmsd_db
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
