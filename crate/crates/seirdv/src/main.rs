use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seirdv::commands::{cmd_analyze, cmd_fit, cmd_ingest, Analysis, AnalyzeOptions};
use seirdv::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "seirdv",
    version,
    about = "Fit and analyse the SEIRDV intervention model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override sampler.seed (and the analysis seed when unset)
    #[arg(long)]
    seed: Option<u64>,
    /// Override sampler.chains
    #[arg(long)]
    chains: Option<usize>,
    /// Override analysis.out_dir
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert JHU CSV files into the canonical observed series
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Run the Metropolis-Hastings chains
    Fit {
        #[command(flatten)]
        common: Common,
        /// Override sampler.n_samples
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Posterior tables, bands and counterfactuals from chain files
    Analyze {
        #[arg(value_enum)]
        which: Analysis,
        #[command(flatten)]
        common: Common,
        /// Chain CSV (repeatable); defaults to the fit outputs
        #[arg(long = "chain", id = "chain_files")]
        chain_files: Vec<PathBuf>,
        /// Predicted t,I,R_I,D,V table for pseudo-r2
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Override analysis.thin
        #[arg(long)]
        thin: Option<usize>,
    },
}

fn load(
    common: &Common,
    n_samples: Option<usize>,
    thin: Option<usize>,
) -> seirdv::Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        seed: common.seed,
        chains: common.chains,
        out: common.out.clone(),
        n_samples,
        thin,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> seirdv::Result<()> {
    match cli.command {
        Command::Ingest { common } => {
            let report = cmd_ingest(&load(&common, None, None)?)?;
            println!(
                "wrote {} ({} rows, {} cleaning warnings)",
                report.output.display(),
                report.rows,
                report.warnings.len()
            );
        }
        Command::Fit { common, samples } => {
            let report = cmd_fit(&load(&common, samples, None)?)?;
            for p in &report.chain_paths {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", report.summary_path.display());
            println!("wall time {:.1} s", report.wall_seconds);
        }
        Command::Analyze {
            which,
            common,
            chain_files,
            predictions,
            thin,
        } => {
            let cfg = load(&common, None, thin)?;
            let report = cmd_analyze(
                &cfg,
                which,
                &AnalyzeOptions {
                    chains: chain_files,
                    predictions,
                },
            )?;
            if let Some(r2) = report.pseudo_r2 {
                println!("pseudo-R2 {r2:?}");
            }
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
