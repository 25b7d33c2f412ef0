//! Shared helpers for commands that consume run directories: transcript
//! discovery, trajectory extraction, and inventory resolution.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cape_core::inventory::{load_inventory, Inventory};
use cape_core::scoring::{trajectory_from_transcript, ScoringTrajectory};
use cape_core::session::Transcript;

/// Transcript files in a directory, sorted by filename for determinism.
/// Cassettes (`*.cassette.jsonl`) are skipped.
pub fn transcript_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("reading run directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".jsonl") && !name.ends_with(".cassette.jsonl") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        bail!("no transcripts (*.jsonl) found in {}", dir.display());
    }
    Ok(paths)
}

pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>> {
    transcript_paths(dir)?
        .iter()
        .map(|p| Transcript::read_jsonl(p).map_err(Into::into))
        .collect()
}

/// Extract trajectories, failing with the run id of any invalid transcript.
pub fn trajectories(transcripts: &[Transcript]) -> Result<Vec<ScoringTrajectory>> {
    transcripts
        .iter()
        .map(|t| trajectory_from_transcript(t).map_err(Into::into))
        .collect()
}

/// Resolve the inventory the runs used: an explicit override, or the path
/// recorded in the first transcript's config snapshot.
pub fn resolve_inventory(
    override_path: Option<&Path>,
    transcripts: &[Transcript],
) -> Result<Inventory> {
    let path: PathBuf = match override_path {
        Some(p) => p.to_path_buf(),
        None => {
            let first = transcripts
                .first()
                .context("no transcripts to take an inventory reference from")?;
            PathBuf::from(&first.config.inventory)
        }
    };
    load_inventory(&path).with_context(|| {
        format!(
            "loading inventory {} (use --inventory to override the recorded path)",
            path.display()
        )
    })
}
