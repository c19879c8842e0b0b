use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rarefan::io::{self, ExitStatus, ExperimentKind};
use rarefan::Error;

#[derive(Parser)]
#[command(name = "rarefan", version, about = "Second-class particles in totally asymmetric zero-range and exclusion processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON configuration (or a previous manifest).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `masterSeed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `outDir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `N`.
        #[arg(long)]
        replicas: Option<usize>,
        /// Worker threads; results do not depend on it.
        #[arg(long, env = "RAREFAN_THREADS")]
        threads: Option<usize>,
    },
    /// Print the available experiments.
    ListExperiments,
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    replicas: Option<usize>,
    threads: Option<usize>,
) -> Result<ExitStatus, Error> {
    let mut cfg = io::load_config(&config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(n) = replicas {
        cfg.n = Some(n);
    }
    cfg.plan()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    io::run(&cfg, out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<14}{}", kind.name(), kind.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            out,
            replicas,
            threads,
        } => match run(config, seed, out, replicas, threads) {
            Ok(status) => {
                match status {
                    ExitStatus::ThresholdFailed => eprintln!("acceptance threshold not met; see summary.json"),
                    ExitStatus::LightConeAbort => eprintln!("aborted: light-cone guard violated too often"),
                    _ => {}
                }
                ExitCode::from(status as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(ExitStatus::Failure as u8)
            }
        },
    }
}
