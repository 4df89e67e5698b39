use std::path::PathBuf;
use std::process::ExitCode;

use advcausal_lab::config::ExperimentConfig;
use advcausal_lab::pipeline::{Pipeline, TrainTarget};
use advcausal_lab::report::to_json;
use advcausal_lab::LabResult;
use clap::{Parser, Subcommand};

/// Adversarial training, attacks and causal-parameter estimation on small classifiers.
#[derive(Parser)]
#[command(name = "advcausal", version)]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Evaluation threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory; ADVCAUSAL_OUT takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest the dataset and cache both splits.
    GenData,
    /// Train a checkpoint.
    Train {
        /// at | trades | adml
        #[arg(long)]
        defense: TrainTarget,
        /// Starting checkpoint for adml (default: the base defense's checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Attack the test split.
    Attack {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Name of an [attack.NAME] section.
        #[arg(long)]
        attack: String,
    },
    /// Estimate the causal parameter on the test split.
    EstimateTheta {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Robustness report for one checkpoint, or baseline,fine-tuned pair.
    Report {
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Split/cross-fit and treatment-set grid over one baseline.
    Ablate {
        /// Baseline checkpoint; trained from scratch when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> LabResult<String> {
    let config_path = cli
        .config
        .ok_or_else(|| advcausal_lab::LabError::config("--config PATH is required"))?;
    let config = ExperimentConfig::load(&config_path, cli.seed)?;
    let out = std::env::var_os("ADVCAUSAL_OUT").map(PathBuf::from).or(cli.out);
    let p = Pipeline::new(config, out, cli.threads);
    Ok(match cli.command {
        Command::GenData => to_json(&p.gen_data()?),
        Command::Train { defense, checkpoint } => {
            let path = p.train(defense, checkpoint.as_deref())?;
            format!("{}\n", path.display())
        }
        Command::Attack { checkpoint, attack } => to_json(&p.attack(&checkpoint, &attack)?),
        Command::EstimateTheta { checkpoint } => to_json(&p.estimate_theta(&checkpoint)?),
        Command::Report { checkpoints } => to_json(&p.report(&checkpoints)?),
        Command::Ablate { checkpoint } => to_json(&p.ablate(checkpoint.as_deref())?),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("advcausal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
