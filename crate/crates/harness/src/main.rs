use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acfair_harness::config::{ExperimentConfig, SweepAxis};
use acfair_harness::pareto::pareto;
use acfair_harness::pipeline::{repetition_seed, LoadedSource};
use acfair_harness::sweep::{sweep, RowKind, SweepOptions, SweepTable, RESULTS_FILE};
use acfair_harness::theory_check::{theory_check, TheoryTarget};
use acfair_harness::{run_once, HarnessError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acfair", version, about = "Collective label-flipping experiments for group fairness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Keep successful rows of an earlier run in the output directory and
    /// re-run only failed or missing cells.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One cell: the config's strategy on the first repetition.
    Run(Common),
    /// Sweep the flip budget.
    SweepFlips(SweepArgs),
    /// Sweep the collective's share alpha.
    SweepAlpha(SweepArgs),
    /// Sweep the visible share of majority data.
    SweepKnowledge(SweepArgs),
    /// Budget sweep plus the post-processing point, with dominance flags.
    Pareto(SweepArgs),
    /// Emit the collective's flip plan for the whole dataset.
    Plan(Common),
    /// Run the closed-form verifiers; exit code 1 when any fails.
    TheoryCheck {
        #[arg(long, default_value = "all", value_parser = TheoryTarget::NAMES)]
        which: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `theory.json` here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.into(), source: e })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::Io { path, source: e })
}

/// Use the config's axis when it matches, the default grid when it has none.
fn with_axis(mut cfg: ExperimentConfig, wanted: SweepAxis) -> Result<ExperimentConfig> {
    match &cfg.sweep {
        SweepAxis::None => cfg.sweep = wanted,
        axis if axis.name() == wanted.name() => {}
        axis => {
            return Err(HarnessError::Config(format!(
                "config sweeps {}, command sweeps {}",
                axis.name(),
                wanted.name()
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_aggregates(table: &SweepTable, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let only = SweepTable {
                rows: table.rows_of(RowKind::Aggregate).cloned().collect(),
            };
            print!("{}", only.to_csv_string()?);
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&table.rows)?),
    }
    if table.failures() > 0 {
        eprintln!("{} failed cells; re-run with --resume to retry them", table.failures());
    }
    Ok(())
}

fn run_sweep(args: SweepArgs, axis: SweepAxis) -> Result<()> {
    let (cfg, out) = load(&args.common)?;
    let cfg = with_axis(cfg, axis)?;
    let opts = SweepOptions {
        workers: args.workers,
        out_dir: out.clone(),
        resume: args.resume,
    };
    let table = sweep(&cfg, &opts)?;
    if let Some(dir) = out {
        eprintln!("wrote {}", dir.join(RESULTS_FILE).display());
    }
    print_aggregates(&table, args.common.format)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = load(&common)?;
            let point = cfg.sweep.points(&cfg.strategy).into_iter().next().expect("at least one point");
            let seed = repetition_seed(cfg.seed, 0);
            let cell = run_once(&cfg, Some(&point), seed)?;
            let text = match common.format {
                Format::Json => serde_json::to_string_pretty(&cell)? + "\n",
                Format::Csv => {
                    let row = acfair_harness::sweep::ResultRow::from_result(&cell, RowKind::Cell, true);
                    SweepTable { rows: vec![row] }.to_csv_string()?
                }
            };
            match out {
                Some(dir) => write(&dir, if matches!(common.format, Format::Json) { "run.json" } else { "run.csv" }, &text)?,
                None => print!("{text}"),
            }
        }
        Command::SweepFlips(args) => run_sweep(args, SweepAxis::default_budgets())?,
        Command::SweepAlpha(args) => run_sweep(args, SweepAxis::default_alphas())?,
        Command::SweepKnowledge(args) => run_sweep(args, SweepAxis::default_knowledge())?,
        Command::Pareto(args) => {
            let (cfg, out) = load(&args.common)?;
            let opts = SweepOptions {
                workers: args.workers,
                out_dir: out.clone(),
                resume: args.resume,
            };
            let table = pareto(&cfg, &opts)?;
            let text = match args.common.format {
                Format::Csv => table.to_csv_string()?,
                Format::Json => serde_json::to_string_pretty(&table.points)? + "\n",
            };
            if let Some(dir) = &out {
                table.write_csv(dir.join("pareto.csv"))?;
            }
            print!("{text}");
        }
        Command::Plan(common) => {
            let (cfg, out) = load(&common)?;
            let source = LoadedSource::load(&cfg.data)?;
            let seed = repetition_seed(cfg.seed, 0);
            let (data, _) = source.materialize(seed)?;
            let strategy = acfair::strategies::StrategyConfig {
                seed: acfair_harness::pipeline::cell_seed(seed, 0),
                ..cfg.strategy.clone()
            };
            let plan = acfair::strategies::plan(&data, &strategy)?;
            let (name, text) = match common.format {
                Format::Csv => ("plan.csv", plan.to_csv_string()?),
                Format::Json => ("plan.json", plan.to_json()? + "\n"),
            };
            match out {
                Some(dir) => write(&dir, name, &text)?,
                None => print!("{text}"),
            }
            eprintln!("{} flips ({})", plan.len(), plan.strategy);
        }
        Command::TheoryCheck { which, seed, out } => {
            let summary = theory_check(which.parse()?, seed)?;
            let text = serde_json::to_string_pretty(&summary)? + "\n";
            if let Some(dir) = out {
                write(&dir, "theory.json", &text)?;
            }
            print!("{text}");
            return Ok(summary.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
