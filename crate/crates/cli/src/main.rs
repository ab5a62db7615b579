use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stratabc_cli::config::{parse_config, ExperimentConfig};
use stratabc_cli::data::write_reference_data;
use stratabc_cli::error::{CliError, CliResult};
use stratabc_cli::runner::{diagnose_chain_file, output_path, run_batch, run_experiment};

#[derive(Parser)]
#[command(name = "stratabc", version, about = "Resampling and stratified ABC-MCMC experiments")]
struct Cli {
    /// Directory that receives every run's output directory.
    #[arg(long, global = true, env = "STRATABC_OUTPUT_ROOT", default_value = "results")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage (and the sweep, if any) of an experiment config.
    Run { config: PathBuf },
    /// Run only the likelihood sweep of a config.
    Sweep { config: PathBuf },
    /// Run independent replicates of a config with derived seeds.
    Batch {
        config: PathBuf,
        #[arg(long, short = 'k')]
        replicates: usize,
    },
    /// Validate a config and print it with every default filled in.
    Check { config: PathBuf },
    /// Mixing diagnostics of a chain file.
    Diag {
        chain: PathBuf,
        /// Iterations to discard; a fifth of the chain when absent.
        #[arg(long)]
        burn: Option<usize>,
    },
    /// Write the reference observed datasets.
    Data { dir: PathBuf },
}

fn load(path: &Path) -> CliResult<ExperimentConfig> {
    parse_config(path)
}

fn main_inner(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let a = run_experiment(&cfg, &output_path(&cfg, &cli.output_root))?;
            println!("{}", a.dir.display());
        }
        Command::Sweep { config } => {
            let mut cfg = load(&config)?;
            if cfg.sweep.is_none() {
                return Err(CliError::config(format!("{} has no [sweep] table", config.display())));
            }
            cfg.stages.clear();
            let a = run_experiment(&cfg, &output_path(&cfg, &cli.output_root))?;
            println!("{}", a.dir.display());
        }
        Command::Batch { config, replicates } => {
            let cfg = load(&config)?;
            let dir = output_path(&cfg, &cli.output_root);
            run_batch(&cfg, &dir, replicates)?;
            println!("{}", dir.display());
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            print!("{}", cfg.to_toml());
        }
        Command::Diag { chain, burn } => {
            let v = diagnose_chain_file(&chain, burn)?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        }
        Command::Data { dir } => {
            for p in write_reference_data(&dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
