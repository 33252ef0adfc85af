use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use platewise::synth::SynthConfig;
use platewise_cli::{exit_code, run_all, run_stage, write_synthetic, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "platewise", version, about = "Standard-aligned meal generation and substitution pipeline")]
struct Cli {
    /// Pipeline config (TOML). Relative paths inside it resolve against its directory.
    #[arg(short, long, global = true, default_value = "platewise.toml")]
    config: PathBuf,
    /// Output directory; overrides PLATEWISE_OUT and `paths.output`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bundled synthetic corpus, a price book and a config into a directory.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 400)]
        meals_per_type: usize,
    },
    /// Harmonize codes, drop LOF outliers and rarely present foods.
    Ingest,
    /// Aggregate foods into subcategory prototypes.
    Prototype,
    /// Merge small clusters and profile distinctive features.
    ClusterProfile,
    /// Fit the empirical presence sampler.
    FitSampler,
    /// Draw food combinations per cluster.
    Generate,
    /// Portion generated combinations.
    Portion,
    /// Compare generated and real meals.
    Evaluate,
    /// Price real and generated meals.
    Price,
    /// Retrieve substitution candidates for real meals.
    Substitute,
    /// Sweep the health/cost trade-off and build the frontier.
    Sweep,
    /// Summarize a completed run.
    Report,
    /// Every stage in order.
    Run,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let stage = match &cli.command {
        Command::Synth { dir, meals_per_type } => {
            let seed = cli.seed.unwrap_or(SynthConfig::default().seed);
            let synth = SynthConfig { seed, meals_per_type: *meals_per_type, ..SynthConfig::default() };
            let path = write_synthetic(dir, &synth)?;
            println!("wrote synthetic corpus and {}", path.display());
            return Ok(());
        }
        Command::Run => None,
        Command::Ingest => Some(Stage::Ingest),
        Command::Prototype => Some(Stage::Prototype),
        Command::ClusterProfile => Some(Stage::ClusterProfile),
        Command::FitSampler => Some(Stage::FitSampler),
        Command::Generate => Some(Stage::Generate),
        Command::Portion => Some(Stage::Portion),
        Command::Evaluate => Some(Stage::Evaluate),
        Command::Price => Some(Stage::Price),
        Command::Substitute => Some(Stage::Substitute),
        Command::Sweep => Some(Stage::Sweep),
        Command::Report => Some(Stage::Report),
    };
    let cfg = load_config(&cli)?;
    let out = cfg.output_dir(cli.out.as_deref())?;
    let manifests = match stage {
        Some(s) => vec![run_stage(s, &cfg, &out)?],
        None => run_all(&cfg, &out)?,
    };
    for m in manifests {
        println!("{}: {} outputs", m.stage, m.outputs.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
