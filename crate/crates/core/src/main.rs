use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coalspec::config::{ConfigError, ExperimentConfig};
use coalspec::experiment::{cmd_run, cmd_sweep, cmd_verify, CliError};

#[derive(Parser)]
#[command(name = "coalspec", version, about = "Coalitional spectrum sensing and access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario for each seed.
    Run(RunArgs),
    /// Run the sweep described by the config.
    Sweep(RunArgs),
    /// Check the model's structural properties.
    Verify {
        /// 100 draws per property instead of 1000.
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true)]
        inject_externality_fault: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds as `1,2,3` or a half-open range `0..10`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        return Ok((a..b).collect());
    }
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed {s:?}")))
        .collect()
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = &args.seeds {
        config.seeds = parse_seeds(s).map_err(|e| CliError::Config(ConfigError::new(format!("--seeds: {e}"))))?;
        if config.seeds.is_empty() {
            return Err(CliError::Config(ConfigError::new("--seeds: at least one seed is required")));
        }
    }
    let out = args.out.clone().unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(args) => {
            let (config, out) = load(&args)?;
            cmd_run(&config, Some(&args.config), &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Sweep(args) => {
            let (config, out) = load(&args)?;
            cmd_sweep(&config, Some(&args.config), &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Verify {
            quick,
            inject_externality_fault,
        } => cmd_verify(quick, inject_externality_fault),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
