//! `cape pairs`: logical-consistency accuracy per pair kind, per run,
//! emitted as CSV.

use std::path::PathBuf;

use anyhow::{Context, Result};
use cape_core::inventory::load_pairs;
use cape_core::scoring::logical_consistency;
use clap::Args;

use crate::manifest::ManifestBuilder;
use crate::runs;
use crate::svg::{csv_table, fmt_f64};

#[derive(Args, Debug)]
pub struct PairsArgs {
    /// Directory holding run transcripts.
    #[arg(long)]
    pub runs: PathBuf,
    /// Pair files to score (repeatable; typically one similar and one
    /// inconsistent file).
    #[arg(long = "pairs", required = true)]
    pub pair_files: Vec<PathBuf>,
    /// Inventory override.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output CSV.
    #[arg(long, default_value = "pairs.csv")]
    pub out: PathBuf,
}

pub fn execute(args: &PairsArgs) -> Result<()> {
    let transcripts = runs::load_transcripts(&args.runs)?;
    let inv = runs::resolve_inventory(args.inventory.as_deref(), &transcripts)?;
    let trajs = runs::trajectories(&transcripts)?;

    let mut rows = Vec::new();
    for file in &args.pair_files {
        let pairs = load_pairs(file, &inv)
            .with_context(|| format!("loading pair file {}", file.display()))?;
        for traj in &trajs {
            let acc = logical_consistency(&pairs, traj)?;
            rows.push(vec![
                traj.run_id.clone(),
                acc.kind.to_string(),
                acc.accurate.to_string(),
                acc.total.to_string(),
                fmt_f64(acc.accuracy),
            ]);
        }
    }
    let csv = csv_table(&["run_id", "kind", "accurate", "total", "accuracy"], &rows);
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, csv)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("{} pair rows -> {}", rows.len(), args.out.display());
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        let mut manifest = ManifestBuilder::new(dir, "pairs");
        manifest.add(&args.out);
        manifest.write()?;
    }
    Ok(())
}
