//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data, 3 property failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qgnn_noise::experiment::{
    cmd_analyze, cmd_gen_data, cmd_sweep, cmd_theory, cmd_validate, AnalyzeOptions, ExperimentConfig, ExperimentError,
    SweepOptions,
};
use qgnn_noise::trainer::GradientFault;

#[derive(Parser)]
#[command(name = "qgnn-noise", version, about = "Noise-response sweeps for an equivariant quantum graph network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    RySign,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (seed, ε) pair of the grid, appending to runs.jsonl.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Continue an existing run log, skipping finished pairs.
        #[arg(long)]
        resume: bool,
        /// Stop after this many new runs.
        #[arg(long)]
        max_runs: Option<usize>,
    },
    /// Build the cohort report and CSV tables from a run log.
    Analyze {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Accept runs from a different config digest.
        #[arg(long)]
        force: bool,
    },
    /// Run the property suite on small random instances.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Print per-molecule optimal ε and the cohort range.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic JSON-lines dataset.
    GenData {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        max_atoms: usize,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Property,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep { config, resume, max_runs } => {
            let config = ExperimentConfig::load(&config)?;
            let s = cmd_sweep(&config, &SweepOptions { resume, limit: max_runs })?;
            println!(
                "runs: {} executed ({} ok, {} failed), {} already done -> {}",
                s.executed,
                s.succeeded,
                s.failed,
                s.skipped,
                config.runs_path().display()
            );
        }
        Command::Analyze { runs, config, out, force } => {
            let config = ExperimentConfig::load(&config)?;
            let r = cmd_analyze(&runs, &config, &out, &AnalyzeOptions { force })?;
            let [b, d, m] = r.category_fractions;
            println!("seeds: {} (excluded {:?})", r.summaries.len(), r.excluded_seeds);
            println!("beneficial {b:.3}  detrimental {d:.3}  marginal {m:.3}");
            println!("mean ΔR² {:.3}%  range [{:.3}, {:.3}]", r.mean_delta_r2, r.delta_r2_min, r.delta_r2_max);
            if let Some(p) = r.pearson {
                println!("pearson r {:.4} (p {:.3e})", p.statistic, p.p_value);
            }
            if let Some(p) = r.permutation {
                println!("permutation spread {:.3} (p {:.4})", p.observed, p.p_value);
            }
            println!("report written to {}", out.display());
        }
        Command::Validate { config, inject_fault } => {
            let config = ExperimentConfig::load(&config)?;
            let fault = inject_fault.map(|Fault::RySign| GradientFault::FlipRyShiftSign);
            let report = cmd_validate(&config, fault)?;
            print!("{}", report.render());
            if let Some((lo, hi)) = report.gate_count_range {
                println!("dataset gate_count range: [{lo}, {hi}]");
            }
            if !report.all_passed() {
                return Err(Failure::Property);
            }
        }
        Command::Theory { config, json } => {
            let config = ExperimentConfig::load(&config)?;
            let table = cmd_theory(&config)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table).expect("table serializes"));
            } else {
                print!("{}", table.render());
            }
        }
        Command::GenData { count, seed, out, max_atoms } => {
            let n = cmd_gen_data(count, seed, max_atoms, &out)?;
            println!("wrote {n} graphs to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Property) => {
            eprintln!("validation failed");
            ExitCode::from(3)
        }
    }
}
