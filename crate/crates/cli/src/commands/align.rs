//! `cape align`: OCEAN alignment between a human-annotated profile and
//! model-derived scores, on matching declared scales.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cape_core::inventory::Trait;
use cape_core::metrics::{ocean_alignment, TraitProfile, ValueScale};
use clap::Args;
use serde::Deserialize;

use crate::commands::score::ScoresFile;

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Human-annotated profile (JSON: scale + per-trait scores).
    #[arg(long)]
    pub human: PathBuf,
    /// Model profile: either the same format or a `cape score` output
    /// (averaged over its runs).
    #[arg(long)]
    pub scores: PathBuf,
    /// Traits to exclude, comma-separated letters (e.g. `N` or `N,E`).
    #[arg(long)]
    pub mask: Option<String>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct ProfileFile {
    #[allow(dead_code)]
    schema_version: u32,
    scale: ValueScale,
    scores: ProfileScores,
}

#[derive(Debug, Deserialize)]
struct ProfileScores {
    #[serde(rename = "O")]
    o: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "N")]
    n: f64,
}

fn load_profile(path: &Path) -> Result<TraitProfile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading profile {}", path.display()))?;
    // A `cape score` output carries a runs array; average it on the 1–5
    // scale. Otherwise expect an explicit profile file.
    if let Ok(scores) = serde_json::from_str::<ScoresFile>(&text) {
        if !scores.runs.is_empty() {
            let mean = scores.mean_ocean().expect("non-empty runs");
            return Ok(TraitProfile::from_ocean(&mean));
        }
    }
    let profile: ProfileFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing profile {}", path.display()))?;
    Ok(TraitProfile {
        scores: [
            profile.scores.o,
            profile.scores.c,
            profile.scores.e,
            profile.scores.a,
            profile.scores.n,
        ],
        scale: profile.scale,
    })
}

pub fn parse_mask(s: &str) -> Result<BTreeSet<Trait>> {
    let mut mask = BTreeSet::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let t = Trait::from_code(part.trim())
            .with_context(|| format!("unknown trait {part:?} in mask"))?;
        mask.insert(t);
    }
    Ok(mask)
}

pub fn execute(args: &AlignArgs) -> Result<()> {
    let human = load_profile(&args.human)?;
    let model = load_profile(&args.scores)?;
    let mask = match &args.mask {
        Some(s) => parse_mask(s)?,
        None => BTreeSet::new(),
    };
    let report = ocean_alignment(&human, &model, &mask)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, &json)
                .with_context(|| format!("writing {}", path.display()))?;
            println!(
                "OA {:.2}  MAE {:.4} -> {}",
                report.oa,
                report.mae,
                path.display()
            );
        }
        None => print!("{json}"),
    }
    if report.oa < 0.0 {
        bail!("alignment produced an out-of-range OA");
    }
    Ok(())
}
