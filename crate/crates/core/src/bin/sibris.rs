//! Command-line front end for the Monte-Carlo experiments.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 on an I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sibris::experiment::{self, ConfigError, ExperimentConfig, ExperimentError, SweepVar};

#[derive(Parser)]
#[command(name = "sibris", version, about = "Monte-Carlo experiments for information-bearing RIS in CR-NOMA networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Run with the sweep given on the command line.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// K, P_dbm, N, M, r_th or none.
        #[arg(long)]
        var: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = experiment::parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

fn config_exit(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        ConfigError::Io { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, sweep) = match cli.command {
        Command::Run(common) => (common, None),
        Command::Sweep { common, var, values } => (common, Some((var, values))),
    };
    let mut cfg = match load(&common) {
        Ok(c) => c,
        Err(e) => return config_exit(&e),
    };
    if let Some((var, values)) = sweep {
        let Some(var) = SweepVar::parse(&var) else {
            eprintln!("error: unknown sweep variable '{var}' (expected K, P_dbm, N, M, r_th or none)");
            return ExitCode::from(2);
        };
        cfg = match cfg.with_sweep(var, values) {
            Ok(c) => c,
            Err(e) => return config_exit(&e),
        };
    }

    let rows = match experiment::run_experiment(&cfg, common.jobs) {
        Ok(rows) => rows,
        Err(ExperimentError::Config(e)) => return config_exit(&e),
        Err(e @ ExperimentError::Io { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let failed = rows.iter().filter(|r| !r.status.is_success()).count();
    println!("wrote {} rows to {} ({failed} infeasible or failed)", rows.len(), cfg.output_path.display());
    println!("median WSSE (bits/s/Hz):");
    for (scheme, value, med) in experiment::median_wsse(&rows) {
        println!("  {scheme:<14} {}={value:<8} {med:.4}", cfg.sweep_var);
    }
    ExitCode::SUCCESS
}
