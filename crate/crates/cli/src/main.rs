use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pregame_core::eval::experiment::ModelSpec;
use pregame_core::pipeline::{self, RunConfig, StageOutcome, StageStatus};
use pregame_core::synth::{season, SeasonConfig};
use pregame_core::{Error, Level, Metric};

/// Pre-game interview analytics: ingest play-by-play and transcripts, build
/// labeled examples, evaluate models and interpret their confidences.
#[derive(Parser, Debug)]
#[command(name = "pregame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the play-by-play table and transcripts into canonical stores.
    Ingest(RunArgs),
    /// Compute metric stores and labeled examples for every mode.
    Build(RunArgs),
    /// Run the stratified evaluation grid.
    Eval(RunArgs),
    /// Fit topic models and analyse a predictions file.
    Interpret(InterpretArgs),
    /// Render the evaluation tables and topic summary.
    Report(RunArgs),
    /// Every stage in order.
    Run(RunArgs),
    /// Write a synthetic season and a run config into a directory.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Rerun stages even when their manifest is current.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    level: Option<Level>,
    /// Comma-separated metric names, e.g. PTS,SR.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    /// Comma-separated model ids, e.g. CC,TFIDF-LR-T.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelSpec>>,
    /// Split seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct InterpretArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Predictions file to analyse instead of the eval export.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Model id to select from the predictions file.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    dir: PathBuf,
    #[arg(long, default_value_t = 212)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    games: usize,
}

impl RunArgs {
    fn load(&self) -> pregame_core::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(level) = self.level {
            cfg.build.levels = vec![level];
            cfg.interpret.level = level;
        }
        if let Some(m) = &self.metrics {
            cfg.eval.metrics = m.clone();
        }
        if let Some(m) = &self.models {
            cfg.eval.models = m.clone();
        }
        if let Some(s) = self.seed {
            cfg.seeds.split = s;
        }
        if let Some(k) = self.folds {
            cfg.eval.n_folds = k;
        }
        if let Some(f) = self.test_fraction {
            cfg.eval.test_fraction = f;
        }
        Ok(cfg)
    }
}

fn print_outcome(o: &StageOutcome) {
    let status = match o.status {
        StageStatus::Ran => "done",
        StageStatus::UpToDate => "up to date",
    };
    println!("{}: {status} ({} outputs)", o.stage, o.outputs.len());
    for n in &o.notes {
        println!("  {n}");
    }
}

fn execute(cli: Cli) -> pregame_core::Result<()> {
    let outcomes = match cli.command {
        Command::Ingest(a) => vec![pipeline::cmd_ingest(&a.load()?, a.force)?],
        Command::Build(a) => vec![pipeline::cmd_build(&a.load()?, a.force)?],
        Command::Eval(a) => vec![pipeline::cmd_eval(&a.load()?, a.force)?],
        Command::Interpret(a) => {
            let mut cfg = a.run.load()?;
            if let Some(p) = a.predictions {
                cfg.interpret.predictions = Some(p);
            }
            if let Some(m) = a.model {
                cfg.interpret.model = Some(m);
            }
            vec![pipeline::cmd_interpret(&cfg, a.run.force)?]
        }
        Command::Report(a) => {
            let cfg = a.load()?;
            let o = pipeline::cmd_report(&cfg, a.force)?;
            let text = std::fs::read_to_string(cfg.paths.output.join("report/report.txt"))?;
            print!("{text}");
            vec![o]
        }
        Command::Run(a) => pipeline::run_all(&a.load()?, a.force)?,
        Command::Demo(a) => {
            let cfg = SeasonConfig {
                n_games: a.games,
                ..Default::default()
            };
            let path = pipeline::write_demo(&a.dir, &season(&cfg, a.seed), "")?;
            println!("wrote {}", path.display());
            Vec::new()
        }
    };
    outcomes.iter().for_each(print_outcome);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
