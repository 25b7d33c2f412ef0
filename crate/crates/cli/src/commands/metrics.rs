//! `cape metrics`: the consistency report (TAR, ED, TC, OC) over one
//! directory of aligned runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cape_core::metrics::consistency_report;
use cape_core::session::HistoryMode;
use clap::Args;

use crate::manifest::ManifestBuilder;
use crate::runs;

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Directory holding the run transcripts to compare.
    #[arg(long)]
    pub runs: PathBuf,
    /// Factor tag for the report (defaults to the recorded run-id prefix).
    #[arg(long)]
    pub factor: Option<String>,
    /// Inventory override.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Extra `key=value` settings recorded in the report (repeatable),
    /// e.g. `--set trial=2 --set model=gpt-x`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub settings: Vec<String>,
    /// Output file.
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

pub fn execute(args: &MetricsArgs) -> Result<()> {
    let transcripts = runs::load_transcripts(&args.runs)?;
    let inv = runs::resolve_inventory(args.inventory.as_deref(), &transcripts)?;
    let trajs = runs::trajectories(&transcripts)?;

    let factor = args.factor.clone().unwrap_or_else(|| {
        let id = &transcripts[0].run_id;
        id.rsplit_once('-')
            .map(|(prefix, _)| prefix.to_string())
            .unwrap_or_else(|| id.clone())
    });

    let mut settings: BTreeMap<String, String> = BTreeMap::new();
    let first = &transcripts[0].config;
    settings.insert(
        "mode".into(),
        match first.history_mode {
            HistoryMode::ContextFree => "context-free".into(),
            HistoryMode::ContextDependent => "context-dependent".into(),
            HistoryMode::FewShot { k } => format!("few-shot:{k}"),
        },
    );
    settings.insert(
        "backend".into(),
        serde_json::to_string(&first.backend)?,
    );
    settings.insert("variant".into(), first.variant.clone());
    settings.insert("inventory".into(), inv.name.clone());
    for kv in &args.settings {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        settings.insert(k.trim().to_string(), v.trim().to_string());
    }

    let report = consistency_report(&factor, &trajs, &inv, settings)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "factor {}: TAR {:.2}  ED {:.2}  TC {:.2}  OC {:.2} -> {}",
        report.factor,
        report.tar,
        report.ed,
        report.tc,
        report.oc,
        args.out.display()
    );
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        let mut manifest = ManifestBuilder::new(dir, "metrics");
        manifest.add(&args.out);
        manifest.write()?;
    }
    Ok(())
}
