use std::path::PathBuf;
use std::process::ExitCode;

use adoption_paths::curvefit::SelectionMode;
use adoption_paths::pipeline::{
    run_pipeline, run_stage, RunConfig, SplitChoice, Stage, ThresholdChoice,
};
use adoption_paths::Error;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

/// Fits cumulative adoption curves for every entity of a region, scores them
/// against the regional mean and classifies them into adoption paths.
#[derive(Parser)]
#[command(name = "adoption-paths", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage.
    Run(Options),
    /// Fit a curve to every entity and to the regional mean.
    Fit(Options),
    /// Compute the adoption-over-time index from the fitted curves.
    Ati(Options),
    /// Extract entry time, latest intensity and latest trajectory.
    Features(Options),
    /// Assign tiers and adoption paths.
    Classify(Options),
    /// Compare paths between the two halves of the timeline.
    Transitions(Options),
    /// Descriptive moments and the signed-rank comparison.
    Stats(Options),
}

#[derive(Args)]
struct Options {
    /// Long-format panel: entity_id,time,value or entity_id,time,pv_area,built_area.
    #[arg(short, long)]
    input: PathBuf,

    /// Directory for the output tables and manifest.
    #[arg(short, long, default_value = "adoption-paths-out")]
    output: PathBuf,

    /// Entry threshold as a fraction of the mean intensity, or `auto`.
    #[arg(long, default_value = "auto")]
    threshold_fraction: String,

    /// Minimum R² for a curve family to be admitted.
    #[arg(long, default_value_t = 0.9)]
    r2_min: f64,

    /// Rank admitted fits by `adjusted` or `plain` R².
    #[arg(long, default_value = "adjusted")]
    selection_mode: String,

    /// Adjusted R² margin within which the simpler curve is preferred.
    #[arg(long, default_value_t = 1e-3)]
    tie_margin: f64,

    /// Time splitting the two halves (input units), or `mid`.
    #[arg(long, default_value = "mid")]
    split_time: String,

    /// Relative tolerance of the area integrals.
    #[arg(long, default_value_t = 1e-10)]
    quad_rel_tol: f64,
}

impl Options {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut config = RunConfig::new(&self.input, &self.output);
        config.threshold = self.threshold_fraction.parse::<ThresholdChoice>()?;
        config.r2_min = self.r2_min;
        config.selection_mode = self.selection_mode.parse::<SelectionMode>()?;
        config.tie_margin = self.tie_margin;
        config.split = self.split_time.parse::<SplitChoice>()?;
        config.quad_rel_tol = self.quad_rel_tol;
        config.validate()?;
        Ok(config)
    }
}

fn execute(command: &Command) -> anyhow::Result<()> {
    let (options, stage) = match command {
        Command::Run(o) => (o, None),
        Command::Fit(o) => (o, Some(Stage::Fit)),
        Command::Ati(o) => (o, Some(Stage::Ati)),
        Command::Features(o) => (o, Some(Stage::Features)),
        Command::Classify(o) => (o, Some(Stage::Classify)),
        Command::Transitions(o) => (o, Some(Stage::Transitions)),
        Command::Stats(o) => (o, Some(Stage::Stats)),
    };
    let config = options.config()?;
    match stage {
        None => run_pipeline(&config).context("pipeline failed")?,
        Some(stage) => {
            run_stage(&config, stage).with_context(|| format!("stage `{stage}` failed"))?
        }
    }
    Ok(())
}

/// 2 for configuration problems and missing files, 1 for bad data.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::MissingFile(_) | Error::SplitOutOfDomain { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
