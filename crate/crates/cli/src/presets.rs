//! Experiment presets: named expansions of a base session config into the
//! run lists the sensitivity factors and analyses need. Expansion is pure;
//! per-run seeds derive from the master seed and run id.

use anyhow::{bail, Result};
use cape_core::session::{derive_run_seed, HistoryMode, OrderingStrategy, ParaphraseRef, SessionConfig};

pub const ALL_PRESETS: [&str; 11] = [
    "stability",
    "temperature",
    "option-wording",
    "option-order",
    "instruction",
    "item-paraphrasing",
    "fewshot-ablation",
    "adversarial",
    "ordering",
    "alignment",
    "logical-consistency",
];

pub struct PresetOptions {
    /// Paraphrase sidecar for the item-paraphrasing factor.
    pub paraphrases: Option<String>,
    /// Few-shot window sizes for the ablation preset.
    pub fewshot_ks: Vec<usize>,
    /// Forced semantic option for the adversarial preset.
    pub force_option: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            paraphrases: None,
            fewshot_ks: vec![1, 5, 10, 20],
            force_option: 2,
        }
    }
}

fn child(base: &SessionConfig, suffix: &str) -> SessionConfig {
    let mut c = base.clone();
    c.run_id = format!("{}-{}", base.run_id, suffix);
    let master = base.params.seed.unwrap_or(0);
    c.params.seed = Some(derive_run_seed(master, &c.run_id));
    c
}

/// Expand a named preset over the base config. The six sensitivity-factor
/// presets produce exactly 3 runs each.
pub fn expand(name: &str, base: &SessionConfig, opts: &PresetOptions) -> Result<Vec<SessionConfig>> {
    let configs = match name {
        "stability" => (1..=3).map(|k| child(base, &format!("r{k}"))).collect(),
        "temperature" => [0.5, 1.0, 1.5]
            .iter()
            .map(|&t| {
                let mut c = child(base, &format!("t{t}"));
                c.params.temperature = t;
                c
            })
            .collect(),
        "option-wording" => (1..=3)
            .map(|n| {
                let mut c = child(base, &format!("wording{n}"));
                c.variant = format!("wording-{n}");
                c
            })
            .collect(),
        "option-order" => (1..=3)
            .map(|n| {
                let mut c = child(base, &format!("order{n}"));
                c.variant = format!("order-{n}");
                c
            })
            .collect(),
        "instruction" => (1..=3)
            .map(|n| {
                let mut c = child(base, &format!("instruction{n}"));
                c.variant = format!("instruction-{n}");
                c
            })
            .collect(),
        "item-paraphrasing" => {
            let Some(file) = &opts.paraphrases else {
                bail!("the item-paraphrasing factor needs --paraphrases FILE");
            };
            let mut out = vec![child(base, "original")];
            for index in 0..2 {
                let mut c = child(base, &format!("paraphrase{}", index + 1));
                c.paraphrase = Some(ParaphraseRef {
                    file: file.clone(),
                    index,
                });
                out.push(c);
            }
            out
        }
        "fewshot-ablation" => {
            if opts.fewshot_ks.is_empty() {
                bail!("fewshot-ablation needs at least one window size");
            }
            let mut out: Vec<SessionConfig> = opts
                .fewshot_ks
                .iter()
                .map(|&k| {
                    let mut c = child(base, &format!("fewshot{k}"));
                    c.history_mode = HistoryMode::FewShot { k };
                    c
                })
                .collect();
            let mut full = child(base, "fullshot");
            full.history_mode = HistoryMode::ContextDependent;
            out.push(full);
            out
        }
        "adversarial" => {
            let mut before = child(base, "before");
            before.history_mode = HistoryMode::ContextDependent;
            before.adversarial = None;
            let mut after = child(base, "after");
            after.history_mode = HistoryMode::ContextDependent;
            after.adversarial = Some(opts.force_option);
            vec![before, after]
        }
        "ordering" => {
            let seed = base.params.seed.unwrap_or(0);
            [
                ("canonical", OrderingStrategy::Canonical),
                ("random", OrderingStrategy::Random { seed }),
                ("trait-grouped", OrderingStrategy::TraitGrouped),
                ("cyclic-rotation", OrderingStrategy::CyclicRotation),
            ]
            .into_iter()
            .map(|(tag, ordering)| {
                let mut c = child(base, tag);
                c.ordering = ordering;
                c
            })
            .collect()
        }
        "alignment" => {
            let mut out = Vec::new();
            for (mode, tag) in [
                (HistoryMode::ContextFree, "free"),
                (HistoryMode::ContextDependent, "dep"),
            ] {
                for k in 1..=3 {
                    let mut c = child(base, &format!("{tag}-r{k}"));
                    c.history_mode = mode;
                    out.push(c);
                }
            }
            out
        }
        "logical-consistency" => vec![child(base, "pairs")],
        other => bail!(
            "unknown preset {other:?} (expected one of {})",
            ALL_PRESETS.join(", ")
        ),
    };
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cape_core::backend::{BackendSpec, GenerationParams};

    const FACTOR_PRESETS: [&str; 6] = [
        "stability",
        "temperature",
        "option-wording",
        "option-order",
        "instruction",
        "item-paraphrasing",
    ];

    fn base() -> SessionConfig {
        SessionConfig {
            run_id: "exp".into(),
            inventory: "inv.json".into(),
            variant: "default".into(),
            backend: BackendSpec::Constant { reply: "A".into() },
            history_mode: HistoryMode::ContextFree,
            ordering: OrderingStrategy::Canonical,
            adversarial: None,
            persona: None,
            params: GenerationParams {
                seed: Some(42),
                ..Default::default()
            },
            paraphrase: None,
        }
    }

    #[test]
    fn factor_presets_expand_to_three_runs() {
        let opts = PresetOptions {
            paraphrases: Some("p.json".into()),
            ..Default::default()
        };
        for name in FACTOR_PRESETS {
            let configs = expand(name, &base(), &opts).unwrap();
            assert_eq!(configs.len(), 3, "{name}");
            // Question order comes from the shared base config.
            for c in &configs {
                assert_eq!(c.ordering, OrderingStrategy::Canonical);
                assert!(c.params.seed.is_some());
            }
        }
    }

    #[test]
    fn temperature_levels() {
        let configs = expand("temperature", &base(), &Default::default()).unwrap();
        let temps: Vec<f64> = configs.iter().map(|c| c.params.temperature).collect();
        assert_eq!(temps, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn order_and_wording_pick_builtin_variants() {
        let configs = expand("option-order", &base(), &Default::default()).unwrap();
        let ids: Vec<&str> = configs.iter().map(|c| c.variant.as_str()).collect();
        assert_eq!(ids, vec!["order-1", "order-2", "order-3"]);
        let configs = expand("option-wording", &base(), &Default::default()).unwrap();
        assert!(configs.iter().all(|c| c.variant.starts_with("wording-")));
    }

    #[test]
    fn adversarial_preset_is_before_after() {
        let configs = expand("adversarial", &base(), &Default::default()).unwrap();
        assert_eq!(configs.len(), 2);
        assert_eq!(configs[0].adversarial, None);
        assert_eq!(configs[1].adversarial, Some(2));
        assert!(configs
            .iter()
            .all(|c| c.history_mode == HistoryMode::ContextDependent));
    }

    #[test]
    fn paraphrasing_requires_sidecar() {
        assert!(expand("item-paraphrasing", &base(), &Default::default()).is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(expand("nope", &base(), &Default::default()).is_err());
    }

    #[test]
    fn expansion_is_deterministic() {
        let a = expand("stability", &base(), &Default::default()).unwrap();
        let b = expand("stability", &base(), &Default::default()).unwrap();
        assert_eq!(a, b);
        let seeds: Vec<_> = a.iter().map(|c| c.params.seed).collect();
        assert_ne!(seeds[0], seeds[1]);
    }
}
