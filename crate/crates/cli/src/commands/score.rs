//! `cape score`: trajectories and OCEAN vectors for every run in a
//! directory.

use std::path::PathBuf;

use anyhow::{Context, Result};
use cape_core::inventory::SCHEMA_VERSION;
use cape_core::scoring::{ocean_score, OceanScore};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::manifest::ManifestBuilder;
use crate::runs;

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Directory holding run transcripts.
    #[arg(long)]
    pub runs: PathBuf,
    /// Inventory override (defaults to the path recorded in the runs).
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output file.
    #[arg(long, default_value = "scores.json")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunScores {
    pub run_id: String,
    pub item_ids: Vec<String>,
    pub scores: Vec<u8>,
    pub ocean: OceanScore,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoresFile {
    pub schema_version: u32,
    pub inventory: String,
    pub runs: Vec<RunScores>,
}

impl ScoresFile {
    pub fn mean_ocean(&self) -> Option<OceanScore> {
        if self.runs.is_empty() {
            return None;
        }
        let mut sums = [0.0f64; 5];
        for r in &self.runs {
            for (i, v) in r.ocean.as_array().iter().enumerate() {
                sums[i] += v;
            }
        }
        let n = self.runs.len() as f64;
        Some(OceanScore::from_array([
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            sums[4] / n,
        ]))
    }
}

pub fn execute(args: &ScoreArgs) -> Result<()> {
    let transcripts = runs::load_transcripts(&args.runs)?;
    let inv = runs::resolve_inventory(args.inventory.as_deref(), &transcripts)?;
    let trajs = runs::trajectories(&transcripts)?;
    let mut out_runs = Vec::with_capacity(trajs.len());
    for t in &trajs {
        out_runs.push(RunScores {
            run_id: t.run_id.clone(),
            item_ids: t.item_ids.clone(),
            scores: t.scores.clone(),
            ocean: ocean_score(t, &inv)?,
        });
    }
    let file = ScoresFile {
        schema_version: SCHEMA_VERSION,
        inventory: inv.name.clone(),
        runs: out_runs,
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("scores for {} runs -> {}", file.runs.len(), args.out.display());

    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        let mut manifest = ManifestBuilder::new(dir, "score");
        manifest.add(&args.out);
        manifest.write()?;
    }
    Ok(())
}
