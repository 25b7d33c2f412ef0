//! Deterministic scripted respondents. All are pure functions of
//! (messages, params, seed), so concurrent use and replay are trivially
//! reproducible. Numeric backends answer with canonical letters (A–E maps
//! to agreement levels 0–4), which is what the default prompt variant
//! displays.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{validate_messages, BackendError, ChatBackend, ChatMessage, GenerationParams, Role};

const LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

/// Always replies with the same text.
pub struct ConstantBackend {
    reply: String,
}

impl ConstantBackend {
    pub fn new(reply: impl Into<String>) -> ConstantBackend {
        ConstantBackend {
            reply: reply.into(),
        }
    }
}

impl ChatBackend for ConstantBackend {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        params.validate()?;
        Ok(self.reply.clone())
    }

    fn model_id(&self) -> String {
        format!("constant:{}", self.reply)
    }
}

/// Extract the first option letter (A–E) referenced in a reply: a bare
/// single-letter token or a parenthesised one.
fn extract_letter(text: &str) -> Option<char> {
    for token in text.split_whitespace() {
        let core: String = token
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        if core.len() == 1 {
            let c = core.chars().next().unwrap().to_ascii_uppercase();
            if LETTERS.contains(&c) {
                return Some(c);
            }
        }
    }
    None
}

/// Replies with the modal letter of prior assistant turns; a configurable
/// fallback covers the first turn. Ties break toward the alphabetically
/// smallest letter.
pub struct HistoryMajorityBackend {
    fallback: String,
}

impl HistoryMajorityBackend {
    pub fn new(fallback: impl Into<String>) -> HistoryMajorityBackend {
        HistoryMajorityBackend {
            fallback: fallback.into(),
        }
    }
}

impl ChatBackend for HistoryMajorityBackend {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        params.validate()?;
        let mut counts = [0usize; 5];
        for m in messages.iter().filter(|m| m.role == Role::Assistant) {
            if let Some(c) = extract_letter(&m.content) {
                counts[(c as u8 - b'A') as usize] += 1;
            }
        }
        let best = (0..5).max_by_key(|&i| (counts[i], 4 - i));
        match best {
            Some(i) if counts[i] > 0 => Ok(LETTERS[i].to_string()),
            _ => Ok(self.fallback.clone()),
        }
    }

    fn model_id(&self) -> String {
        format!("history-majority:{}", self.fallback)
    }
}

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Answers each question from a per-question base table (derived from a
/// stable hash of the question text), then flips to an adjacent option with
/// probability `flip_prob` using an RNG seeded from (backend seed, params
/// seed, messages). Used for consistency-metric monotonicity tests: higher
/// flip probability means noisier trajectories.
pub struct NoisyTableBackend {
    flip_prob: f64,
    seed: u64,
}

impl NoisyTableBackend {
    pub fn new(flip_prob: f64, seed: u64) -> Result<NoisyTableBackend, String> {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(format!("flip probability must be in [0,1], got {flip_prob}"));
        }
        Ok(NoisyTableBackend { flip_prob, seed })
    }

    /// The base (un-flipped) option index for a question text.
    pub fn base_option(question: &str) -> usize {
        (hash64(&[b"noisy-table-base", question.as_bytes()]) % 5) as usize
    }
}

impl ChatBackend for NoisyTableBackend {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        params.validate()?;
        let question = &messages.last().expect("validated non-empty").content;
        let mut option = Self::base_option(question);
        let call_seed = hash64(&[
            b"noisy-table-call",
            &self.seed.to_le_bytes(),
            &params.seed.unwrap_or(0).to_le_bytes(),
            question.as_bytes(),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(call_seed);
        if rng.random_bool(self.flip_prob) {
            let up = rng.random_bool(0.5);
            option = match (option, up) {
                (0, _) => 1,
                (4, _) => 3,
                (o, true) => o + 1,
                (o, false) => o - 1,
            };
        }
        Ok(LETTERS[option].to_string())
    }

    fn model_id(&self) -> String {
        format!("noisy-table:p{}:s{}", self.flip_prob, self.seed)
    }
}
