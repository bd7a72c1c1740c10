use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ufa_core::attack::AttackTag;
use ufa_core::eval::Protocol;
use ufa_core::experiment::{report, Experiment, ExperimentConfig, Summary};
use ufa_core::{Error, Result};

/// Universal Fourier adversarial attacks on time-series classifiers.
#[derive(Parser)]
#[command(name = "ufa", version)]
struct Cli {
    /// TOML experiment config; every leaf has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config leaf, e.g. `--set eval.n_each=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest the dataset and cache both splits.
    SynthData,
    /// Train the white-box and black-box classifiers.
    TrainClassifier,
    /// Train one universal attack against the white-box model.
    TrainAttack {
        #[arg(long)]
        variant: AttackTag,
    },
    /// Run one evaluation protocol.
    Eval {
        #[arg(long)]
        protocol: Protocol,
    },
    /// Consolidate the reports of an artifact directory.
    Report {
        /// Defaults to the config's output_dir.
        dir: Option<PathBuf>,
    },
    /// Every stage in order, then the report.
    RunAll,
    /// Print the effective config as TOML.
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path, &cli.overrides),
        None => ExperimentConfig::from_toml("", &cli.overrides),
    }
}

fn print_digest(summary: &Summary) {
    println!("config {}", summary.config_hash);
    for row in &summary.digest {
        println!("{:<12} {:<16} {:<22} {:>3} x={:<8} {:.4}", row.protocol, row.series, row.attack_tag, row.model_tag, row.x, row.metric);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let dir = cfg.output_dir.clone();
    let exp = Experiment::new(cfg)?;
    match cli.command {
        Command::SynthData => {
            let (train, val) = exp.synth_data()?;
            println!("wrote {} train / {} val examples to {}", train.len(), val.len(), dir.join("data").display());
        }
        Command::TrainClassifier => {
            let [wb, bb] = exp.train_classifiers()?;
            println!("wb val accuracy {:.4} ({} epochs)", wb.best_val_accuracy(), wb.epochs.len());
            println!("bb val accuracy {:.4} ({} epochs)", bb.best_val_accuracy(), bb.epochs.len());
        }
        Command::TrainAttack { variant } => {
            let a = exp.train_attack(variant)?;
            println!("{variant}: power {:.4e}", ufa_core::signal::power(a.v_time()));
        }
        Command::Eval { protocol } => {
            let r = exp.eval(protocol)?;
            println!("{protocol}: {} rows written to {}", r.rows.len(), dir.join("reports").display());
        }
        Command::Report { dir: given } => print_digest(&report(&given.unwrap_or(dir))?),
        Command::RunAll => print_digest(&exp.run_all()?),
        Command::ShowConfig => print!("{}", exp.config().to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}
