//! Prompt rendering and reply parsing.
//!
//! An [`OptionSet`] fully decouples three things that prompt-sensitivity
//! factors vary independently: the letter labels, the option wordings (kept
//! in semantic order, most-agree first), and the order in which the five
//! options are listed. Scoring always works on the *semantic* index of the
//! wording the model picked, never the displayed letter.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{InventoryItem, SCHEMA_VERSION};

/// How a label prefixes its wording when listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelStyle {
    /// `(A) Very Accurate`
    #[default]
    Paren,
    /// `A) Strongly agree`
    Suffix,
}

impl LabelStyle {
    pub fn format(self, label: &str, wording: &str) -> String {
        match self {
            LabelStyle::Paren => format!("({label}) {wording}"),
            LabelStyle::Suffix => format!("{label}) {wording}"),
        }
    }
}

/// Five labelled response options.
///
/// Display slot `i` shows label `labels[i]` next to the wording
/// `wordings[presentation_order[i]]`; `wordings` is in semantic order
/// (index 0 = most agree, 4 = most disagree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSet {
    pub labels: Vec<String>,
    pub wordings: Vec<String>,
    pub presentation_order: Vec<usize>,
    #[serde(default)]
    pub label_style: LabelStyle,
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_separator() -> String {
    "\n".to_string()
}

/// A concrete rendering recipe: instruction template plus option set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub variant_id: String,
    pub instruction_template: String,
    pub option_set: OptionSet,
}

/// A reply resolved to a semantic agreement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedChoice {
    /// 0 = most-agree wording, 4 = most-disagree.
    pub semantic_index: usize,
    /// The letter displayed next to the chosen wording.
    pub presented_label: String,
    pub raw_text: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {got} (expected {SCHEMA_VERSION})")]
    SchemaVersion { got: u32 },
    #[error("variant \"{variant_id}\": {message}")]
    InvalidVariant { variant_id: String, message: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("no option matched reply {raw_text:?}")]
    NoChoice { raw_text: String },
    #[error("multiple options matched reply {raw_text:?}: {candidates:?}")]
    AmbiguousChoice {
        raw_text: String,
        candidates: Vec<String>,
    },
}

impl ParseError {
    pub fn raw_text(&self) -> &str {
        match self {
            ParseError::NoChoice { raw_text } => raw_text,
            ParseError::AmbiguousChoice { raw_text, .. } => raw_text,
        }
    }
}

impl OptionSet {
    /// Display slot of `label`, if present.
    pub fn slot_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Semantic index of the wording displayed next to `label`.
    pub fn semantic_for_label(&self, label: &str) -> Option<usize> {
        self.slot_of_label(label)
            .map(|slot| self.presentation_order[slot])
    }

    /// Label displayed next to the wording with semantic index `semantic`.
    pub fn label_for_semantic(&self, semantic: usize) -> &str {
        let slot = self
            .presentation_order
            .iter()
            .position(|&s| s == semantic)
            .expect("valid permutation covers every semantic index");
        &self.labels[slot]
    }

    /// One option line, e.g. `(C) Neither Accurate Nor Inaccurate`.
    pub fn render_slot(&self, slot: usize) -> String {
        self.label_style
            .format(&self.labels[slot], &self.wordings[self.presentation_order[slot]])
    }

    /// Render `semantic` as it would appear in the option list.
    pub fn render_semantic(&self, semantic: usize) -> String {
        self.label_style
            .format(self.label_for_semantic(semantic), &self.wordings[semantic])
    }

    /// The full options block in display order.
    pub fn render_options(&self) -> String {
        (0..self.labels.len())
            .map(|slot| self.render_slot(slot))
            .collect::<Vec<_>>()
            .join(&self.separator)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.labels.len() != 5 || self.wordings.len() != 5 || self.presentation_order.len() != 5
        {
            return Err("option set must have exactly 5 labels, wordings, and slots".into());
        }
        let unique_labels: BTreeSet<_> = self.labels.iter().collect();
        if unique_labels.len() != 5 {
            return Err("labels must be unique".into());
        }
        let unique_wordings: BTreeSet<_> = self.wordings.iter().collect();
        if unique_wordings.len() != 5 {
            return Err("wordings must be unique".into());
        }
        for label in &self.labels {
            let ok = label.len() == 1 && label.chars().all(|c| c.is_ascii_alphanumeric());
            if !ok {
                return Err(format!("label {label:?} must be a single letter or digit"));
            }
        }
        let mut sorted = self.presentation_order.clone();
        sorted.sort_unstable();
        if sorted != [0, 1, 2, 3, 4] {
            return Err("presentation_order must be a permutation of 0..4".into());
        }
        Ok(())
    }
}

impl PromptVariant {
    pub fn validate(&self) -> Result<(), PromptError> {
        let fail = |message: String| PromptError::InvalidVariant {
            variant_id: self.variant_id.clone(),
            message,
        };
        for placeholder in ["{item}", "{options}"] {
            match self.instruction_template.matches(placeholder).count() {
                1 => {}
                n => {
                    return Err(fail(format!(
                        "template must contain {placeholder} exactly once, found {n}"
                    )))
                }
            }
        }
        self.option_set.validate().map_err(fail)
    }
}

/// Variant file schema: a `PromptVariant` plus `schema_version`.
#[derive(Debug, Serialize, Deserialize)]
struct VariantFile {
    schema_version: u32,
    #[serde(flatten)]
    variant: PromptVariant,
}

pub fn load_variant(path: impl AsRef<Path>) -> Result<PromptVariant, PromptError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PromptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: VariantFile = serde_json::from_str(&text).map_err(|source| PromptError::Json {
        path: path.display().to_string(),
        source,
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(PromptError::SchemaVersion {
            got: file.schema_version,
        });
    }
    file.variant.validate()?;
    Ok(file.variant)
}

pub fn variant_to_json(variant: &PromptVariant) -> String {
    let file = VariantFile {
        schema_version: SCHEMA_VERSION,
        variant: variant.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("variant serializes");
    s.push('\n');
    s
}

/// Render the assessment prompt for one item.
pub fn render_prompt(item: &InventoryItem, variant: &PromptVariant) -> String {
    variant
        .instruction_template
        .replace("{item}", &item.text)
        .replace("{options}", &variant.option_set.render_options())
}

fn strip_punct(s: &str) -> &str {
    s.trim_matches(|c: char| {
        c.is_whitespace() || matches!(c, '.' | ',' | ':' | ';' | '!' | '?' | '"' | '\'' | '(' | ')' | '[' | ']' | '*' | '`')
    })
}

/// Distinct labels referenced by the reply as letters.
///
/// A bare whole-reply letter matches case-insensitively; parenthesised or
/// `X)`-suffixed letters match case-insensitively; bare single-letter tokens
/// inside longer replies must match the label case exactly, so the article
/// "a" never reads as option A.
fn letter_candidates(reply: &str, options: &OptionSet) -> Vec<String> {
    let mut found: BTreeSet<String> = BTreeSet::new();
    let find_label = |c: &str, ci: bool| -> Option<String> {
        options
            .labels
            .iter()
            .find(|l| {
                if ci {
                    l.eq_ignore_ascii_case(c)
                } else {
                    l.as_str() == c
                }
            })
            .cloned()
    };

    let whole = strip_punct(reply);
    if whole.chars().count() == 1 {
        if let Some(label) = find_label(whole, true) {
            return vec![label];
        }
    }

    for token in reply.split_whitespace() {
        let had_marker = token.starts_with('(') || strip_punct(token) != token.trim_matches(|c: char| c.is_whitespace());
        let has_paren = token.contains('(') || token.contains(')');
        let core = strip_punct(token);
        if core.chars().count() != 1 || !core.chars().all(|c| c.is_ascii_alphanumeric()) {
            continue;
        }
        let _ = had_marker;
        if let Some(label) = find_label(core, has_paren) {
            found.insert(label);
        }
    }
    found.into_iter().collect()
}

/// Resolve a model reply to a semantic choice.
///
/// Precedence: (1) a letter naming a label, (2) an exact case-insensitive
/// wording match, (3) a unique wording substring. The semantic index always
/// accounts for the variant's presentation order.
pub fn parse_choice(reply: &str, variant: &PromptVariant) -> Result<ParsedChoice, ParseError> {
    let options = &variant.option_set;

    // Rule 1: letters.
    let letters = letter_candidates(reply, options);
    match letters.len() {
        1 => {
            let label = &letters[0];
            let semantic = options
                .semantic_for_label(label)
                .expect("candidate labels come from the option set");
            return Ok(ParsedChoice {
                semantic_index: semantic,
                presented_label: label.clone(),
                raw_text: reply.to_string(),
            });
        }
        0 => {}
        _ => {
            return Err(ParseError::AmbiguousChoice {
                raw_text: reply.to_string(),
                candidates: letters,
            })
        }
    }

    // Rule 2: exact wording.
    let whole = strip_punct(reply);
    if let Some(semantic) = options
        .wordings
        .iter()
        .position(|w| w.eq_ignore_ascii_case(whole))
    {
        return Ok(ParsedChoice {
            semantic_index: semantic,
            presented_label: options.label_for_semantic(semantic).to_string(),
            raw_text: reply.to_string(),
        });
    }

    // Rule 3: unique wording substring.
    let lower = reply.to_lowercase();
    let matches: Vec<usize> = options
        .wordings
        .iter()
        .enumerate()
        .filter(|(_, w)| lower.contains(&w.to_lowercase()))
        .map(|(i, _)| i)
        .collect();
    match matches.len() {
        1 => {
            let semantic = matches[0];
            Ok(ParsedChoice {
                semantic_index: semantic,
                presented_label: options.label_for_semantic(semantic).to_string(),
                raw_text: reply.to_string(),
            })
        }
        0 => Err(ParseError::NoChoice {
            raw_text: reply.to_string(),
        }),
        _ => Err(ParseError::AmbiguousChoice {
            raw_text: reply.to_string(),
            candidates: matches
                .into_iter()
                .map(|s| options.wordings[s].clone())
                .collect(),
        }),
    }
}

/// Built-in variants mirroring the shipped data files: the default
/// accuracy-scale prompt plus the three instruction, wording, and order
/// variations used by, respectively, the instruction, option-wording, and
/// option-order sensitivity factors.
pub mod builtin {
    use super::*;

    pub const ACCURACY_WORDINGS: [&str; 5] = [
        "Very Accurate",
        "Moderately Accurate",
        "Neither Accurate Nor Inaccurate",
        "Moderately Inaccurate",
        "Very Inaccurate",
    ];

    pub const AGREEMENT_WORDINGS: [[&str; 5]; 3] = [
        ["Strongly agree", "Agree", "Neutral", "Disagree", "Strongly disagree"],
        [
            "Completely Aligned",
            "Partially Aligned",
            "Undecided",
            "Partially Misaligned",
            "Completely Misaligned",
        ],
        [
            "Perfectly Compatible",
            "Mostly Compatible",
            "Neutral",
            "Mostly Incompatible",
            "Perfectly Incompatible",
        ],
    ];

    pub const INSTRUCTION_TEMPLATES: [&str; 3] = [
        "Given a statement of you: 'You {item}'. Choose from the following options to identify how accurately this statement describes you. Always answer using only the option (A, B, C, D, or E) provided. Options: {options}",
        "You can only reply from A) to E) in the following statement. Please indicate the extent to which you agree or disagree with that statement. Options: {options}. Here is the statement of you: 'You {item}'. Always answer using only the option (A, B, C, D, or E) provided.",
        "Here is a characteristic about you: '{item}'. Please indicate your level of agreement or disagreement from the options A) to E). Options: {options}. Always answer using only the option (A, B, C, D, or E) provided.",
    ];

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn letters(xs: &[char]) -> Vec<String> {
        xs.iter().map(|c| c.to_string()).collect()
    }

    /// The default prompt: accuracy wordings listed (A)–(E), one per line.
    pub fn default_variant() -> PromptVariant {
        PromptVariant {
            variant_id: "default".into(),
            instruction_template: "Given a statement about yourself: \"You {item}.\" Please select the most accurate description of how well this statement applies to you from these options:\n{options}".into(),
            option_set: OptionSet {
                labels: letters(&['A', 'B', 'C', 'D', 'E']),
                wordings: strings(&ACCURACY_WORDINGS),
                presentation_order: vec![0, 1, 2, 3, 4],
                label_style: LabelStyle::Paren,
                separator: "\n".into(),
            },
        }
    }

    fn comma_options(labels: &[char], wordings: &[&str], order: &[usize]) -> OptionSet {
        OptionSet {
            labels: letters(labels),
            wordings: strings(wordings),
            presentation_order: order.to_vec(),
            label_style: LabelStyle::Suffix,
            separator: ", ".into(),
        }
    }

    /// Instruction factor: 3 instruction templates over a fixed option set.
    pub fn instruction_variant(n: usize) -> PromptVariant {
        assert!((1..=3).contains(&n));
        PromptVariant {
            variant_id: format!("instruction-{n}"),
            instruction_template: INSTRUCTION_TEMPLATES[n - 1].into(),
            option_set: comma_options(
                &['A', 'B', 'C', 'D', 'E'],
                &AGREEMENT_WORDINGS[0],
                &[0, 1, 2, 3, 4],
            ),
        }
    }

    /// Option-wording factor: 3 wording sets under instruction 1.
    pub fn wording_variant(n: usize) -> PromptVariant {
        assert!((1..=3).contains(&n));
        PromptVariant {
            variant_id: format!("wording-{n}"),
            instruction_template: INSTRUCTION_TEMPLATES[0].into(),
            option_set: comma_options(
                &['A', 'B', 'C', 'D', 'E'],
                &AGREEMENT_WORDINGS[n - 1],
                &[0, 1, 2, 3, 4],
            ),
        }
    }

    /// Option-order factor: original (A B C D E), reverse (E D C B A), and
    /// randomized (C B D A E) listings. Labels keep their canonical meaning;
    /// only the display order changes.
    pub fn order_variant(n: usize) -> PromptVariant {
        assert!((1..=3).contains(&n));
        let (labels, order): (&[char], &[usize]) = match n {
            1 => (&['A', 'B', 'C', 'D', 'E'], &[0, 1, 2, 3, 4]),
            2 => (&['E', 'D', 'C', 'B', 'A'], &[4, 3, 2, 1, 0]),
            _ => (&['C', 'B', 'D', 'A', 'E'], &[2, 1, 3, 0, 4]),
        };
        PromptVariant {
            variant_id: format!("order-{n}"),
            instruction_template: INSTRUCTION_TEMPLATES[0].into(),
            option_set: comma_options(labels, &AGREEMENT_WORDINGS[0], order),
        }
    }

    /// Every built-in variant keyed by id.
    pub fn all() -> Vec<PromptVariant> {
        let mut out = vec![default_variant()];
        for n in 1..=3 {
            out.push(instruction_variant(n));
        }
        for n in 1..=3 {
            out.push(wording_variant(n));
        }
        for n in 1..=3 {
            out.push(order_variant(n));
        }
        out
    }

    pub fn by_id(id: &str) -> Option<PromptVariant> {
        all().into_iter().find(|v| v.variant_id == id)
    }
}
