use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lexnet::pipeline::{Pipeline, RunConfig, Stage, StageOutcome};
use lexnet::synth::generate_synthetic_corpus;
use lexnet::{Error, Result};

/// Community interaction graphs and neologism dynamics.
#[derive(Parser)]
#[command(name = "lexnet", version)]
struct Cli {
    /// TOML run configuration. Without one the bundled synthetic corpus is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Re-run stages even when their manifest is current.
    #[arg(long, global = true)]
    force: bool,
    /// Run a single stage (same as `run STAGE`).
    #[arg(long, global = true)]
    stage: Option<String>,
    /// Worker thread cap; falls back to LEXNET_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one stage (`ingest`, `graphs`, `stats`, `features`, `innovate`,
    /// `survive`, `level`, `report`) or `all`.
    Run { stage: Option<String> },
    /// Write a synthetic corpus with its ground truth to a directory.
    Generate {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn parse_target(s: &str) -> Result<Option<Stage>> {
    if s == "all" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    } else if let Ok(v) = std::env::var("LEXNET_THREADS") {
        let t = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("LEXNET_THREADS must be a positive integer, got `{v}`")))?;
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn generate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let params = cfg.input.synthetic.clone().unwrap_or_default();
    let corpus = generate_synthetic_corpus(cfg.seed, &params)?;
    corpus.write_to(dir)?;
    println!("wrote {} comments to {}", corpus.records.len(), dir.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))?;
    }
    let target = match (&cli.command, &cli.stage) {
        (Some(Command::Config), _) => {
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
        (Some(Command::Generate { dir }), _) => return generate(&cfg, dir),
        (Some(Command::Run { stage: Some(a) }), Some(b)) if a != b => {
            return Err(Error::Config(format!("conflicting stages `{a}` and `--stage {b}`")))
        }
        (Some(Command::Run { stage: Some(s) }), _) | (_, Some(s)) => parse_target(s)?,
        _ => None,
    };
    let pipeline = Pipeline::new(cfg)?;
    for (s, outcome) in pipeline.run(target, cli.force)? {
        let what = match outcome {
            StageOutcome::Ran => "ran",
            StageOutcome::UpToDate => "up to date",
        };
        println!("{s}\t{what}\t{}", pipeline.stage_dir(s).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
