use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use flowdpo::harness::{run_pipeline, run_stage, ExperimentConfig, Stage, StageOutcome};

#[derive(Parser)]
#[command(name = "flowdpo", version, about = "Multi-reward preference optimization on toy flow-matching models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration; toy defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for every artifact.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the toy dataset and train the reference model.
    TrainRef(Common),
    /// Sample k candidates per prompt from the reference model.
    GenPool(Common),
    /// Fit the reward models and score the pool.
    Score(Common),
    /// Compute margin thresholds and strong-domination triplets.
    Pair(Common),
    /// Preference fine-tuning of the reference model.
    Dpo(Common),
    /// Reports for the reference and fine-tuned models.
    Eval(Common),
    /// Every stage in order.
    Pipeline(Common),
}

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report_stage(stage: Stage, outcome: StageOutcome) {
    let status = match outcome {
        StageOutcome::Ran => "done",
        StageOutcome::Cached => "cached",
    };
    eprintln!("{:<10} {status}", stage.name());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (stages, common): (&[Stage], Common) = match cli.command {
        Command::TrainRef(c) => (&[Stage::Data, Stage::TrainRef], c),
        Command::GenPool(c) => (&[Stage::GenPool], c),
        Command::Score(c) => (&[Stage::Score], c),
        Command::Pair(c) => (&[Stage::Pair], c),
        Command::Dpo(c) => (&[Stage::Dpo], c),
        Command::Eval(c) => (&[Stage::Eval], c),
        Command::Pipeline(c) => {
            let cfg = load_config(&c)?;
            let outcome = run_pipeline(&cfg, &c.out)?;
            for (stage, o) in outcome.stages {
                report_stage(stage, o);
            }
            print!("{}", outcome.reference.to_text());
            print!("{}", outcome.finetuned.to_text());
            return Ok(());
        }
    };
    let cfg = load_config(&common)?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    for &stage in stages {
        report_stage(stage, run_stage(stage, &cfg, &common.out)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
