//! Session orchestration: question ordering, history regimes, adversarial
//! rewriting, the per-run loop, and batch execution.
//!
//! One session is strictly sequential (every turn depends on the history so
//! far); distinct sessions in a batch run concurrently with per-run seeds
//! derived from the master seed, so concurrency never changes results.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{
    build_backend, BackendError, BackendSpec, ChatBackend, ChatMessage, GenerationParams,
};
use crate::exec;
use crate::inventory::{load_inventory, load_paraphrases, Inventory, InventoryError, Trait};
use crate::prompt::{self, parse_choice, render_prompt, PromptError, PromptVariant};
use crate::scoring::score_response;

/// Follow-up sent after an unparseable reply; one bounded re-ask per item.
pub const REASK_INSTRUCTION: &str = "Answer with a single option letter.";

/// How much conversational history each question sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryMode {
    ContextFree,
    ContextDependent,
    FewShot { k: usize },
}

/// Question ordering strategy, always an explicit permutation of the
/// inventory's canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingStrategy {
    Canonical,
    Random { seed: u64 },
    TraitGrouped,
    CyclicRotation,
}

/// Reference to a paraphrase sidecar plus the variant index to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseRef {
    pub file: String,
    pub index: usize,
}

/// Everything that defines one assessment run. Inventory and variant are
/// references (paths or built-in variant ids) so the config snapshot stays
/// compact and reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub run_id: String,
    pub inventory: String,
    pub variant: String,
    pub backend: BackendSpec,
    pub history_mode: HistoryMode,
    pub ordering: OrderingStrategy,
    /// Forced semantic option for adversarial history rewriting.
    pub adversarial: Option<usize>,
    /// Optional system prompt (the only persona mechanism).
    pub persona: Option<String>,
    pub params: GenerationParams,
    #[serde(default)]
    pub paraphrase: Option<ParaphraseRef>,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if let HistoryMode::FewShot { k } = self.history_mode {
            if k < 1 {
                return Err(SessionError::InvalidConfig(
                    "few-shot window k must be >= 1".into(),
                ));
            }
        }
        if let Some(s) = self.adversarial {
            if s > 4 {
                return Err(SessionError::InvalidConfig(format!(
                    "adversarial option must be a semantic index 0..4, got {s}"
                )));
            }
        }
        self.params
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// 1-based position in the presentation order.
    pub presentation_index: usize,
    pub item_id: String,
    pub prompt_text: String,
    pub raw_reply: String,
    /// None when parsing failed twice.
    pub semantic_index: Option<usize>,
    pub score: Option<u8>,
    pub reasked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TimingInfo {
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

/// The provenance-bearing record of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub run_id: String,
    pub config: SessionConfig,
    /// True when any item is missing a score or the backend aborted.
    pub invalid: bool,
    pub error: Option<String>,
    pub timing: TimingInfo,
    #[serde(skip)]
    pub entries: Vec<TranscriptEntry>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot write transcript {path}: {message}")]
    Persist { path: String, message: String },
    #[error("cannot read transcript {path}: {message}")]
    Load { path: String, message: String },
}

/// Compute the presentation order of item ids for an inventory.
pub fn order_items(inv: &Inventory, ordering: OrderingStrategy) -> Vec<String> {
    let ids = |filter: &dyn Fn(&crate::inventory::InventoryItem) -> bool| -> Vec<String> {
        inv.items
            .iter()
            .filter(|i| filter(i))
            .map(|i| i.id.clone())
            .collect()
    };
    match ordering {
        OrderingStrategy::Canonical => ids(&|_| true),
        OrderingStrategy::Random { seed } => {
            let mut all = ids(&|_| true);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            all.shuffle(&mut rng);
            all
        }
        OrderingStrategy::TraitGrouped => {
            let mut out = Vec::with_capacity(inv.len());
            for t in Trait::ALL {
                out.extend(ids(&|i| i.dimension == t));
            }
            out
        }
        OrderingStrategy::CyclicRotation => {
            let mut queues: Vec<VecDeque<String>> = Trait::ALL
                .iter()
                .map(|&t| ids(&|i| i.dimension == t).into())
                .collect();
            let mut out = Vec::with_capacity(inv.len());
            while out.len() < inv.len() {
                for q in &mut queues {
                    if let Some(id) = q.pop_front() {
                        out.push(id);
                    }
                }
            }
            out
        }
    }
}

/// Assemble the outbound message list for the current question.
///
/// `prior` holds (prompt, true reply) pairs in presentation order. Under
/// adversarial rewriting every prior assistant turn is replaced by the
/// rendered forced option; the stored transcript keeps the true replies.
pub fn build_history(
    prior: &[(String, String)],
    current_prompt: &str,
    config: &SessionConfig,
    variant: &PromptVariant,
) -> Vec<ChatMessage> {
    let mut messages = Vec::new();
    if let Some(persona) = &config.persona {
        messages.push(ChatMessage::system(persona.clone()));
    }
    let window: &[(String, String)] = match config.history_mode {
        HistoryMode::ContextFree => &[],
        HistoryMode::ContextDependent => prior,
        HistoryMode::FewShot { k } => {
            let take = k.min(prior.len());
            &prior[prior.len() - take..]
        }
    };
    let forced = config
        .adversarial
        .map(|s| variant.option_set.render_semantic(s));
    for (q, r) in window {
        messages.push(ChatMessage::user(q.clone()));
        messages.push(ChatMessage::assistant(match &forced {
            Some(f) => f.clone(),
            None => r.clone(),
        }));
    }
    messages.push(ChatMessage::user(current_prompt.to_string()));
    messages
}

/// Resolve a variant reference: a built-in id first, then a file path.
pub fn resolve_variant(reference: &str) -> Result<PromptVariant, SessionError> {
    if let Some(v) = prompt::builtin::by_id(reference) {
        return Ok(v);
    }
    Ok(prompt::load_variant(reference)?)
}

/// Resolve the inventory reference and apply any paraphrase selection.
pub fn resolve_inventory(config: &SessionConfig) -> Result<Inventory, SessionError> {
    let inv = load_inventory(&config.inventory)?;
    match &config.paraphrase {
        None => Ok(inv),
        Some(p) => {
            let set = load_paraphrases(&p.file, &inv)?;
            Ok(inv.with_paraphrases(&set, p.index)?)
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Run one session with pre-resolved inventory, variant, and backend.
/// Backend failures abort the run and return a partial transcript marked
/// invalid; unparseable items (after one re-ask) score as missing and also
/// mark the run invalid.
pub fn run_session_with(
    config: &SessionConfig,
    inv: &Inventory,
    variant: &PromptVariant,
    backend: &dyn ChatBackend,
) -> Result<Transcript, SessionError> {
    config.validate()?;
    variant.validate()?;
    let started = now_ms();
    let order = order_items(inv, config.ordering);

    let mut entries: Vec<TranscriptEntry> = Vec::with_capacity(order.len());
    let mut prior: Vec<(String, String)> = Vec::with_capacity(order.len());
    let mut invalid = false;
    let mut error = None;

    'items: for (idx, item_id) in order.iter().enumerate() {
        let item = inv.item(item_id).expect("ordering covers inventory ids");
        let prompt_text = render_prompt(item, variant);
        let messages = build_history(&prior, &prompt_text, config, variant);

        let mut raw_reply = match backend.chat(&messages, &config.params) {
            Ok(r) => r,
            Err(e) => {
                invalid = true;
                error = Some(format!("backend failure at item {}: {e}", idx + 1));
                break 'items;
            }
        };
        let mut reasked = false;
        let mut parsed = parse_choice(&raw_reply, variant);
        if parsed.is_err() {
            // One bounded re-ask with an explicit format instruction.
            let mut follow_up = messages.clone();
            follow_up.push(ChatMessage::assistant(raw_reply.clone()));
            follow_up.push(ChatMessage::user(REASK_INSTRUCTION));
            match backend.chat(&follow_up, &config.params) {
                Ok(second) => {
                    reasked = true;
                    raw_reply = second;
                    parsed = parse_choice(&raw_reply, variant);
                }
                Err(e) => {
                    invalid = true;
                    error = Some(format!("backend failure at item {} re-ask: {e}", idx + 1));
                    break 'items;
                }
            }
        }

        let (semantic_index, score) = match &parsed {
            Ok(choice) => (
                Some(choice.semantic_index),
                Some(score_response(item, choice)),
            ),
            Err(_) => {
                invalid = true;
                (None, None)
            }
        };
        entries.push(TranscriptEntry {
            presentation_index: idx + 1,
            item_id: item_id.clone(),
            prompt_text: prompt_text.clone(),
            raw_reply: raw_reply.clone(),
            semantic_index,
            score,
            reasked,
        });
        prior.push((prompt_text, raw_reply));
    }

    Ok(Transcript {
        run_id: config.run_id.clone(),
        config: config.clone(),
        invalid,
        error,
        timing: TimingInfo {
            started_unix_ms: started,
            elapsed_ms: now_ms().saturating_sub(started),
        },
        entries,
    })
}

/// Resolve every reference in the config and run the session.
pub fn run_session(config: &SessionConfig) -> Result<Transcript, SessionError> {
    let inv = resolve_inventory(config)?;
    let variant = resolve_variant(&config.variant)?;
    let backend = build_backend(&config.backend)?;
    run_session_with(config, &inv, &variant, backend.as_ref())
}

/// Derive the per-run generation seed from the batch master seed and run id.
pub fn derive_run_seed(master: u64, run_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(run_id.as_bytes());
    u64::from_le_bytes(hasher.finalize()[..8].try_into().unwrap())
}

/// Expand one config into `runs` sessions (identical question order,
/// per-run derived seeds) and execute them, concurrently when the
/// `parallel` feature is on. Per-run failures don't abort siblings.
pub fn run_batch(
    config: &SessionConfig,
    runs: usize,
) -> Vec<Result<Transcript, SessionError>> {
    let configs: Vec<SessionConfig> = (0..runs)
        .map(|k| {
            let mut c = config.clone();
            c.run_id = format!("{}-r{}", config.run_id, k + 1);
            let master = config.params.seed.unwrap_or(0);
            c.params.seed = Some(derive_run_seed(master, &c.run_id));
            c
        })
        .collect();
    exec::par_map(&configs, run_session)
}

/// Run several distinct configs, each once.
pub fn run_configs(configs: &[SessionConfig]) -> Vec<Result<Transcript, SessionError>> {
    exec::par_map(configs, run_session)
}

const TRANSCRIPT_FORMAT: &str = "cape-transcript/1";

#[derive(Serialize, Deserialize)]
struct TranscriptHeader {
    format: String,
    run_id: String,
    config: SessionConfig,
    invalid: bool,
    error: Option<String>,
    timing: TimingInfo,
}

impl Transcript {
    /// Serialize as JSONL: header line, then one line per entry.
    pub fn to_jsonl(&self, deterministic: bool) -> String {
        let header = TranscriptHeader {
            format: TRANSCRIPT_FORMAT.to_string(),
            run_id: self.run_id.clone(),
            config: self.config.clone(),
            invalid: self.invalid,
            error: self.error.clone(),
            timing: if deterministic {
                TimingInfo::default()
            } else {
                self.timing
            },
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Persist atomically: write to a sibling temp file, then rename.
    pub fn write_jsonl(&self, path: impl AsRef<Path>, deterministic: bool) -> Result<(), SessionError> {
        let path = path.as_ref();
        let persist_err = |message: String| SessionError::Persist {
            path: path.display().to_string(),
            message,
        };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(|e| persist_err(e.to_string()))?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(|e| persist_err(e.to_string()))?;
            f.write_all(self.to_jsonl(deterministic).as_bytes())
                .map_err(|e| persist_err(e.to_string()))?;
            f.sync_all().map_err(|e| persist_err(e.to_string()))?;
        }
        fs::rename(&tmp, path).map_err(|e| persist_err(e.to_string()))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Transcript, SessionError> {
        let path = path.as_ref();
        let load_err = |message: String| SessionError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: TranscriptHeader = serde_json::from_str(
            lines.next().ok_or_else(|| load_err("empty file".into()))?,
        )
        .map_err(|e| load_err(format!("header: {e}")))?;
        if header.format != TRANSCRIPT_FORMAT {
            return Err(load_err(format!("unknown format {:?}", header.format)));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            entries.push(
                serde_json::from_str(line)
                    .map_err(|e| load_err(format!("entry {}: {e}", i + 1)))?,
            );
        }
        Ok(Transcript {
            run_id: header.run_id,
            config: header.config,
            invalid: header.invalid,
            error: header.error,
            timing: header.timing,
            entries,
        })
    }
}
