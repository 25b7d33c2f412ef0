//! `cape`: administer Likert-style personality inventories to chat-model
//! backends under context-free and context-dependent regimes, and quantify
//! response consistency across perturbed runs.

mod commands;
mod config;
mod manifest;
mod presets;
mod runs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::Defaults;

#[derive(Parser, Debug)]
#[command(
    name = "cape",
    version,
    about = "Context-aware personality evaluation harness for chat models",
    propagate_version = true
)]
struct Cli {
    /// Config file with `key = value` defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for batch runs and metric fits.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Zero timestamps and generator comments for byte-reproducible output.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run assessment sessions (optionally expanding a sensitivity factor).
    Run(commands::run::RunArgs),
    /// Run the adversarial-history experiment (before/after a forced option).
    Attack(AttackArgs),
    /// Run the few-shot history ablation.
    Ablate(AblateArgs),
    /// Extract trajectories and OCEAN vectors from recorded runs.
    Score(commands::score::ScoreArgs),
    /// Compute the consistency report (TAR, ED, TC, OC) over a run set.
    Metrics(commands::metrics::MetricsArgs),
    /// Statistical validation over collected consistency reports.
    Stats(commands::stats::StatsArgs),
    /// Emit CSV/SVG figure data from runs.
    Plot(commands::plot::PlotArgs),
    /// OCEAN alignment between human and model profiles.
    Align(commands::align::AlignArgs),
    /// Logical-consistency accuracy over item pairs.
    Pairs(commands::pairs::PairsArgs),
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Option to force into prior replies: a display letter under the
    /// chosen variant or a semantic index 0..4.
    #[arg(long)]
    force_option: String,
    #[command(flatten)]
    run: commands::run::RunArgs,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// Few-shot window sizes, comma separated (e.g. `1,5,10,20`).
    #[arg(long, default_value = "1,5,10,20")]
    fewshot: String,
    #[command(flatten)]
    run: commands::run::RunArgs,
}

fn dispatch(cli: Cli) -> Result<()> {
    let defaults = match &cli.config {
        Some(path) => Defaults::load(path)?,
        None => Defaults::default(),
    };

    #[cfg(feature = "parallel")]
    if let Some(jobs) = defaults.resolve_opt(cli.jobs, "jobs")? {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cli.jobs;

    let deterministic = cli.deterministic || defaults.get("deterministic")?.unwrap_or(false);

    match cli.command {
        Command::Run(args) => {
            let plan = commands::run::plan(&args, &defaults, Default::default())?;
            commands::run::execute(&plan, deterministic)
        }
        Command::Attack(args) => {
            let plan = commands::run::attack_plan(&args.run, &defaults, &args.force_option)?;
            commands::run::execute(&plan, deterministic)
        }
        Command::Ablate(args) => {
            let plan = commands::run::ablate_plan(&args.run, &defaults, &args.fewshot)?;
            commands::run::execute(&plan, deterministic)
        }
        Command::Score(args) => commands::score::execute(&args),
        Command::Metrics(args) => commands::metrics::execute(&args),
        Command::Stats(args) => commands::stats::execute(&args),
        Command::Plot(args) => commands::plot::execute(&args, deterministic),
        Command::Align(args) => commands::align::execute(&args),
        Command::Pairs(args) => commands::pairs::execute(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Single-line, machine-parsable failure report.
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let line = chain.join(": ").replace('\n', "; ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
