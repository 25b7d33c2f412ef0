//! `cape run`, `cape attack`, and `cape ablate`: expand the requested
//! factor or preset into session configs, execute them (concurrently under
//! the `parallel` feature), persist transcripts, and write the manifest.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cape_core::backend::{
    build_backend, cassette::CassetteRecorder, BackendSpec, ChatBackend, GenerationParams,
};
use cape_core::exec;
use cape_core::session::{
    derive_run_seed, resolve_inventory, resolve_variant, run_session_with, HistoryMode,
    OrderingStrategy, SessionConfig,
};
use clap::Args;

use crate::config::Defaults;
use crate::manifest::ManifestBuilder;
use crate::presets::{self, PresetOptions};

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Inventory file to administer.
    #[arg(long)]
    pub inventory: Option<String>,
    /// Backend spec: constant:A | history-majority:A |
    /// noisy-table:p=0.1,seed=7 | replay:FILE | http:PROVIDER:MODEL.
    #[arg(long)]
    pub backend: Option<String>,
    /// Prompt variant: a built-in id (default, instruction-1..3,
    /// wording-1..3, order-1..3) or a variant file path.
    #[arg(long)]
    pub variant: Option<String>,
    /// History regime: context-free | context-dependent | few-shot:K.
    #[arg(long)]
    pub mode: Option<String>,
    /// Factor or experiment preset to expand.
    #[arg(long)]
    pub factor: Option<String>,
    /// Runs for a plain batch (no --factor).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed; per-run seeds derive from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Question ordering: canonical | random | trait-grouped |
    /// cyclic-rotation (random uses --seed).
    #[arg(long)]
    pub ordering: Option<String>,
    /// Output directory for transcripts and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// System-prompt persona text.
    #[arg(long)]
    pub persona: Option<String>,
    /// Paraphrase sidecar file (item-paraphrasing factor).
    #[arg(long)]
    pub paraphrases: Option<String>,
    /// Sampling temperature (the temperature factor overrides per run).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Reply token budget.
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Record a cassette per run alongside each transcript.
    #[arg(long)]
    pub record: bool,
    /// Base run id; per-run ids append preset tags.
    #[arg(long)]
    pub run_id: Option<String>,
}

pub fn parse_mode(s: &str) -> Result<HistoryMode> {
    match s {
        "context-free" => Ok(HistoryMode::ContextFree),
        "context-dependent" => Ok(HistoryMode::ContextDependent),
        other => match other.strip_prefix("few-shot:") {
            Some(k) => Ok(HistoryMode::FewShot {
                k: k.parse().context("few-shot window size")?,
            }),
            None => bail!("unknown mode {other:?} (context-free, context-dependent, few-shot:K)"),
        },
    }
}

fn parse_ordering(s: &str, seed: u64) -> Result<OrderingStrategy> {
    match s {
        "canonical" => Ok(OrderingStrategy::Canonical),
        "random" => Ok(OrderingStrategy::Random { seed }),
        "trait-grouped" => Ok(OrderingStrategy::TraitGrouped),
        "cyclic-rotation" => Ok(OrderingStrategy::CyclicRotation),
        other => bail!(
            "unknown ordering {other:?} (canonical, random, trait-grouped, cyclic-rotation)"
        ),
    }
}

pub struct RunPlan {
    pub factor: String,
    pub configs: Vec<SessionConfig>,
    pub out: PathBuf,
    pub record: bool,
}

pub fn plan(args: &RunArgs, defaults: &Defaults, preset_opts: PresetOptions) -> Result<RunPlan> {
    let inventory = defaults
        .resolve_opt(args.inventory.clone(), "inventory")?
        .context("--inventory is required")?;
    let backend_str: String = defaults
        .resolve_opt(args.backend.clone(), "backend")?
        .context("--backend is required")?;
    let backend: BackendSpec = backend_str.parse()?;
    let variant = defaults.resolve(args.variant.clone(), "variant", "default".to_string())?;
    let mode_str = defaults.resolve(args.mode.clone(), "mode", "context-free".to_string())?;
    let seed = defaults.resolve(args.seed, "seed", 0u64)?;
    let ordering_str =
        defaults.resolve(args.ordering.clone(), "ordering", "canonical".to_string())?;
    let out = defaults.resolve(args.out.clone(), "out", PathBuf::from("out"))?;
    let temperature = defaults.resolve(args.temperature, "temperature", 0.0)?;
    let max_tokens = defaults.resolve(args.max_tokens, "max-tokens", 64u32)?;
    let factor = defaults.resolve_opt(args.factor.clone(), "factor")?;
    let run_id = args.run_id.clone().unwrap_or_else(|| {
        factor
            .clone()
            .unwrap_or_else(|| "batch".to_string())
    });

    let base = SessionConfig {
        run_id,
        inventory,
        variant,
        backend,
        history_mode: parse_mode(&mode_str)?,
        ordering: parse_ordering(&ordering_str, seed)?,
        adversarial: None,
        persona: defaults.resolve_opt(args.persona.clone(), "persona")?,
        params: GenerationParams {
            temperature,
            seed: Some(seed),
            max_tokens,
        },
        paraphrase: None,
    };

    let (factor, configs) = match &factor {
        Some(name) => {
            let configs = presets::expand(name, &base, &preset_opts)?;
            if let Some(runs) = args.runs {
                if runs != configs.len() {
                    bail!(
                        "factor {name} expands to {} runs; drop --runs or pass --runs {}",
                        configs.len(),
                        configs.len()
                    );
                }
            }
            (name.clone(), configs)
        }
        None => {
            let runs = defaults.resolve(args.runs, "runs", 1usize)?;
            if runs < 1 {
                bail!("--runs must be at least 1");
            }
            let configs = (1..=runs)
                .map(|k| {
                    let mut c = base.clone();
                    c.run_id = format!("{}-r{k}", base.run_id);
                    c.params.seed = Some(derive_run_seed(seed, &c.run_id));
                    c
                })
                .collect();
            ("batch".to_string(), configs)
        }
    };
    Ok(RunPlan {
        factor,
        configs,
        out,
        record: args.record,
    })
}

/// Execute a plan: one transcript file per run plus `manifest.json`.
/// Per-run failures are reported but do not abort sibling runs.
pub fn execute(plan: &RunPlan, deterministic: bool) -> Result<()> {
    std::fs::create_dir_all(&plan.out)
        .with_context(|| format!("creating {}", plan.out.display()))?;

    // One backend instance per distinct spec so rate limits are shared.
    let mut backends: Vec<(String, Arc<dyn ChatBackend>)> = Vec::new();
    for config in &plan.configs {
        let key = serde_json::to_string(&config.backend)?;
        if !backends.iter().any(|(k, _)| *k == key) {
            let backend = build_backend(&config.backend)
                .with_context(|| format!("building backend for {}", config.run_id))?;
            backends.push((key, Arc::from(backend)));
        }
    }
    let backend_for = |config: &SessionConfig| -> Arc<dyn ChatBackend> {
        let key = serde_json::to_string(&config.backend).expect("spec serializes");
        backends
            .iter()
            .find(|(k, _)| *k == key)
            .expect("backend built above")
            .1
            .clone()
    };

    let results = exec::par_map(&plan.configs, |config| -> Result<(PathBuf, bool)> {
        let inv = resolve_inventory(config)?;
        let variant = resolve_variant(&config.variant)?;
        let backend = backend_for(config);
        let path = plan.out.join(format!("{}.jsonl", config.run_id));
        let transcript = if plan.record {
            let cassette = plan.out.join(format!("{}.cassette.jsonl", config.run_id));
            let recorder = CassetteRecorder::create(backend, &cassette, deterministic)?;
            run_session_with(config, &inv, &variant, &recorder)?
        } else {
            run_session_with(config, &inv, &variant, backend.as_ref())?
        };
        transcript.write_jsonl(&path, deterministic)?;
        Ok((path, transcript.invalid))
    });

    let mut manifest = ManifestBuilder::new(&plan.out, "run");
    let mut failures = Vec::new();
    for (config, result) in plan.configs.iter().zip(results) {
        match result {
            Ok((path, invalid)) => {
                manifest.add(&path);
                if plan.record {
                    manifest.add(plan.out.join(format!("{}.cassette.jsonl", config.run_id)));
                }
                if invalid {
                    manifest.mark_invalid();
                    eprintln!("warning: run {} is invalid (see transcript error)", config.run_id);
                } else {
                    println!("run {} -> {}", config.run_id, path.display());
                }
            }
            Err(e) => {
                manifest.mark_invalid();
                failures.push(format!("{}: {e}", config.run_id));
            }
        }
    }
    let manifest_path = manifest.write()?;
    println!("factor {}: manifest {}", plan.factor, manifest_path.display());
    if !failures.is_empty() {
        bail!("{} run(s) failed: {}", failures.len(), failures.join("; "));
    }
    Ok(())
}

/// `cape attack`: the adversarial preset with a forced option.
pub fn attack_plan(
    args: &RunArgs,
    defaults: &Defaults,
    force_option: &str,
) -> Result<RunPlan> {
    let variant_ref = defaults.resolve(args.variant.clone(), "variant", "default".to_string())?;
    let variant = resolve_variant(&variant_ref)?;
    let force = parse_force_option(force_option, &variant)?;
    let mut args = args.clone();
    args.factor = Some("adversarial".to_string());
    args.variant = Some(variant_ref);
    if args.mode.is_none() {
        args.mode = Some("context-dependent".to_string());
    }
    plan(
        &args,
        defaults,
        PresetOptions {
            force_option: force,
            ..Default::default()
        },
    )
}

/// Accepts a display letter under the chosen variant or a semantic index.
pub fn parse_force_option(s: &str, variant: &cape_core::prompt::PromptVariant) -> Result<usize> {
    if let Ok(idx) = s.parse::<usize>() {
        if idx > 4 {
            bail!("semantic option index must be 0..4, got {idx}");
        }
        return Ok(idx);
    }
    variant
        .option_set
        .semantic_for_label(&s.to_uppercase())
        .or_else(|| variant.option_set.semantic_for_label(s))
        .with_context(|| format!("{s:?} is not a label of variant {}", variant.variant_id))
}

/// `cape ablate`: the few-shot ablation preset.
pub fn ablate_plan(args: &RunArgs, defaults: &Defaults, fewshot: &str) -> Result<RunPlan> {
    let ks: Vec<usize> = fewshot
        .split(',')
        .map(|s| s.trim().parse().context("few-shot window size"))
        .collect::<Result<_>>()?;
    if ks.iter().any(|&k| k < 1) {
        bail!("few-shot window sizes must be >= 1");
    }
    let mut args = args.clone();
    args.factor = Some("fewshot-ablation".to_string());
    if args.mode.is_none() {
        args.mode = Some("context-dependent".to_string());
    }
    plan(
        &args,
        defaults,
        PresetOptions {
            fewshot_ks: ks,
            ..Default::default()
        },
    )
}
