use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod manifest;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "spatialnav", version, about = "Grid-city corpora, path scoring and hidden-state probes")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; also the default location of stage inputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Txt,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the grid world and write world.json.
    GenWorld,
    /// Relational statements and QA for every ordered POI pair.
    GenRelational(commands::WorldInput),
    /// Shortest-path trajectory corpora and their ground-truth records.
    GenTrajectories(commands::WorldInput),
    /// Circle and triangle membership QA.
    GenRegions(commands::WorldInput),
    /// Critical-step perturbation cases from ground-truth trajectories.
    GenPerturbed(commands::PerturbArgs),
    /// Navigation prefixes with the positions they reach.
    GenStepTargets(commands::WorldInput),
    /// Score predicted navigation text against ground truth.
    Score(commands::ScoreArgs),
    /// Train and evaluate a regression probe over hidden vectors.
    Probe(commands::ProbeArgs),
    /// Latent against physical distance and angle correlations.
    Consistency(commands::ConsistencyArgs),
    /// Turning-point frequencies and the threshold sweep.
    Heatmap(commands::HeatmapArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenWorld => "gen-world",
            Command::GenRelational(_) => "gen-relational",
            Command::GenTrajectories(_) => "gen-trajectories",
            Command::GenRegions(_) => "gen-regions",
            Command::GenPerturbed(_) => "gen-perturbed",
            Command::GenStepTargets(_) => "gen-step-targets",
            Command::Score(_) => "score",
            Command::Probe(_) => "probe",
            Command::Consistency(_) => "consistency",
            Command::Heatmap(_) => "heatmap",
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use spatialnav::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::ConfigInvalid(_) | E::InvalidRatio(..) | E::InvalidCount(_) | E::PoolExhausted { .. } => 2,
                E::Schema { .. }
                | E::Json(_)
                | E::UnknownPoi(_)
                | E::UnknownRoad(_)
                | E::DimensionMismatch { .. }
                | E::TooFewRecords { .. }
                | E::TooFewIds { .. }
                | E::InsufficientPois { .. }
                | E::TrainTestOverlap(_)
                | E::IdenticalEndpoints(_)
                | E::EmptyTrajectory => 3,
                E::Io(_) => 1,
                _ => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let ctx = commands::Context { cfg, common: cli.common, command: cli.command.name() };
    let manifest = match &cli.command {
        Command::GenWorld => commands::gen_world(&ctx),
        Command::GenRelational(a) => commands::gen_relational(&ctx, a),
        Command::GenTrajectories(a) => commands::gen_trajectories(&ctx, a),
        Command::GenRegions(a) => commands::gen_regions(&ctx, a),
        Command::GenPerturbed(a) => commands::gen_perturbed(&ctx, a),
        Command::GenStepTargets(a) => commands::gen_step_targets(&ctx, a),
        Command::Score(a) => commands::score(&ctx, a),
        Command::Probe(a) => commands::probe(&ctx, a),
        Command::Consistency(a) => commands::consistency(&ctx, a),
        Command::Heatmap(a) => commands::heatmap(&ctx, a),
    }?;
    for (k, v) in &manifest.counts {
        log::info!("{k}: {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
