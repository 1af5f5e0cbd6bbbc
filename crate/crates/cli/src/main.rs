use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varfuse::pipeline::{cmd_experiment, run_stage};
use varfuse::synth::write_synthetic;
use varfuse::{CliError, Context, ExperimentConfig, Outcome, RunOptions, Stage};
use varfuse_core::synthfixture::SynthSpec;

#[derive(Parser)]
#[command(
    name = "varfuse",
    version,
    about = "Query-variant generation, retrieval, fusion and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Rerun even if the outputs exist.
    #[arg(long)]
    force: bool,
    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the worker count (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Use the offline stub generator.
    #[arg(long)]
    stub: bool,
    /// Override the generation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the inverted index.
    Index(StageArgs),
    /// Generate query variants for every configured strategy.
    Generate(StageArgs),
    /// Title and RM3 baselines plus one run per query variant.
    Retrieve(StageArgs),
    /// Reciprocal rank fusion of the first m variant runs.
    Fuse(StageArgs),
    /// Metric table with significance marks.
    Evaluate(StageArgs),
    /// Per-topic nDCG differences against the title baseline.
    Analyze(StageArgs),
    /// All stages in order.
    Experiment(StageArgs),
    /// Write a seeded synthetic collection and a stub config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        topics: usize,
        #[arg(long, default_value_t = 40)]
        docs_per_topic: usize,
        #[arg(long, default_value_t = 10)]
        relevant_per_topic: usize,
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn context(args: &StageArgs) -> Result<Context, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.output {
        config.output = out.clone();
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if args.stub {
        config.generation.stub = true;
    }
    if let Some(seed) = args.seed {
        config.generation.seed = seed;
    }
    Context::new(config, RunOptions { force: args.force })
}

fn report(stage: Stage, outcome: Outcome) {
    match outcome {
        Outcome::Ran => eprintln!("{stage}: done"),
        Outcome::Skipped => eprintln!("{stage}: skipped (outputs exist)"),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (stage, args) = match cli.command {
        Command::Synth {
            out,
            topics,
            docs_per_topic,
            relevant_per_topic,
            vocab_size,
            noise_ratio,
            seed,
        } => {
            let spec = SynthSpec {
                num_topics: topics,
                docs_per_topic,
                relevant_per_topic,
                vocab_size,
                noise_ratio,
                seed,
            };
            let config = write_synthetic(&spec, &out)?;
            println!("{}", config.display());
            return Ok(());
        }
        Command::Experiment(args) => {
            for (stage, outcome) in cmd_experiment(&context(&args)?)? {
                report(stage, outcome);
            }
            return Ok(());
        }
        Command::Index(a) => (Stage::Index, a),
        Command::Generate(a) => (Stage::Generate, a),
        Command::Retrieve(a) => (Stage::Retrieve, a),
        Command::Fuse(a) => (Stage::Fuse, a),
        Command::Evaluate(a) => (Stage::Evaluate, a),
        Command::Analyze(a) => (Stage::Analyze, a),
    };
    report(stage, run_stage(&context(&args)?, stage)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error ({}): {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
