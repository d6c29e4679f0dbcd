use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use handoff_lab::harness::{self, HarnessConfig, Overrides};
use handoff_lab::qoe::Codec;
use handoff_lab::Result;

#[derive(Parser)]
#[command(
    name = "handoff-lab",
    version,
    about = "QoE-driven vertical handoff experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Harness configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["g711", "g729"])]
    codec: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trace files for the configured scenario.
    Simulate,
    /// Fit one HMM per interface and cross-validate it.
    TrainHmm {
        traces: PathBuf,
        /// Hidden states per model.
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// One-step QoE-state predictions with a saved model.
    Predict { model: PathBuf, traces: PathBuf },
    /// Evaluate Best, Naive, M4 and the proposed policy on shared runs.
    ComparePolicies,
    /// Merge comparison reports into a summary.
    Report { files: Vec<PathBuf> },
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        seed: cli.global.seed,
        out: cli.global.out,
        codec: cli
            .global
            .codec
            .as_deref()
            .map(str::parse::<Codec>)
            .transpose()?,
    };
    let cfg = HarnessConfig::resolve(cli.global.config.as_deref(), &overrides)?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Simulate => harness::cmd_simulate(&cfg, &mut stdout).map(drop),
        Command::TrainHmm {
            traces,
            states,
            folds,
        } => harness::cmd_train_hmm(&cfg, &traces, states, folds, &mut stdout).map(drop),
        Command::Predict { model, traces } => {
            harness::cmd_predict(&cfg, &model, &traces, &mut stdout).map(drop)
        }
        Command::ComparePolicies => harness::cmd_compare_policies(&cfg, &mut stdout).map(drop),
        Command::Report { files } => harness::cmd_report(&cfg, &files, &mut stdout).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
