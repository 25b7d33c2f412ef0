//! Inventory loading and validation: psychometric items, paraphrase sidecar
//! files, and logical-consistency pair files.
//!
//! All three file kinds are UTF-8 JSON with a `schema_version` field
//! (current: 1). The item order in the file is the canonical order; every
//! ordering strategy elsewhere is an explicit permutation of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// The five OCEAN trait dimensions, in canonical O, C, E, A, N order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Trait {
    O,
    C,
    E,
    A,
    N,
}

impl Trait {
    pub const ALL: [Trait; 5] = [Trait::O, Trait::C, Trait::E, Trait::A, Trait::N];

    pub fn code(self) -> &'static str {
        match self {
            Trait::O => "O",
            Trait::C => "C",
            Trait::E => "E",
            Trait::A => "A",
            Trait::N => "N",
        }
    }

    pub fn from_code(code: &str) -> Option<Trait> {
        match code {
            "O" => Some(Trait::O),
            "C" => Some(Trait::C),
            "E" => Some(Trait::E),
            "A" => Some(Trait::A),
            "N" => Some(Trait::N),
            _ => None,
        }
    }

    /// Index into the canonical O, C, E, A, N order.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Keying sign: whether agreement with the item raises (+1) or lowers (−1)
/// the trait score. Serialized as the integer 1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    Plus,
    Minus,
}

impl Key {
    pub fn sign(self) -> i8 {
        match self {
            Key::Plus => 1,
            Key::Minus => -1,
        }
    }
}

impl Serialize for Key {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_i8(self.sign())
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = i8::deserialize(de)?;
        match v {
            1 => Ok(Key::Plus),
            -1 => Ok(Key::Minus),
            other => Err(serde::de::Error::custom(format!(
                "key sign must be 1 or -1, got {other}"
            ))),
        }
    }
}

/// One self-descriptive statement, phrased in second person without the
/// leading "You".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub id: String,
    pub text: String,
    #[serde(rename = "trait")]
    pub dimension: Trait,
    pub key: Key,
}

/// A validated inventory. Item order is the file order and is preserved
/// exactly; it is immutable after load and safe to share across sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub schema_version: u32,
    pub name: String,
    pub items: Vec<InventoryItem>,
}

/// Paraphrased item texts, keyed by item id. Sidecar to a named inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseSet {
    pub schema_version: u32,
    pub inventory: String,
    pub variants: BTreeMap<String, Vec<String>>,
}

/// The two pair classifications used by the logical-consistency analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    #[serde(rename = "semantically-similar")]
    SemanticallySimilar,
    #[serde(rename = "logically-inconsistent")]
    LogicallyInconsistent,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairKind::SemanticallySimilar => f.write_str("semantically-similar"),
            PairKind::LogicallyInconsistent => f.write_str("logically-inconsistent"),
        }
    }
}

/// A validated list of item-id pairs of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub schema_version: u32,
    pub kind: PairKind,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {got} (expected {SCHEMA_VERSION})")]
    SchemaVersion { got: u32 },
    #[error("inventory has no items")]
    Empty,
    #[error("item {row} (id \"{id}\"): duplicate id")]
    DuplicateId { row: usize, id: String },
    #[error("item {row} (id \"{id}\"): empty text")]
    EmptyText { row: usize, id: String },
    #[error("trait {dimension} has no items")]
    MissingTrait { dimension: Trait },
    #[error("pair {row}: unknown item id \"{id}\"")]
    UnknownPairId { row: usize, id: String },
    #[error("pair {row}: self-pair (\"{id}\", \"{id}\")")]
    SelfPair { row: usize, id: String },
    #[error("pair {row}: duplicate pair (\"{a}\", \"{b}\")")]
    DuplicatePair { row: usize, a: String, b: String },
    #[error("paraphrase entry \"{id}\": unknown item id")]
    UnknownParaphraseId { id: String },
    #[error("paraphrase entry \"{id}\": empty variant list")]
    EmptyParaphrases { id: String },
    #[error("paraphrase file targets inventory \"{got}\", expected \"{expected}\"")]
    InventoryMismatch { expected: String, got: String },
    #[error("item \"{id}\" has no paraphrase variant {index}")]
    MissingParaphrase { id: String, index: usize },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, InventoryError> {
    let text = fs::read_to_string(path).map_err(|source| InventoryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| InventoryError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate an inventory file. Pure and deterministic: the same
/// bytes always produce the same `Inventory`.
pub fn load_inventory(path: impl AsRef<Path>) -> Result<Inventory, InventoryError> {
    let inv: Inventory = read_json(path.as_ref())?;
    validate_inventory(&inv)?;
    Ok(inv)
}

pub fn validate_inventory(inv: &Inventory) -> Result<(), InventoryError> {
    if inv.schema_version != SCHEMA_VERSION {
        return Err(InventoryError::SchemaVersion {
            got: inv.schema_version,
        });
    }
    if inv.items.is_empty() {
        return Err(InventoryError::Empty);
    }
    let mut seen = BTreeSet::new();
    for (idx, item) in inv.items.iter().enumerate() {
        let row = idx + 1;
        if !seen.insert(item.id.clone()) {
            return Err(InventoryError::DuplicateId {
                row,
                id: item.id.clone(),
            });
        }
        if item.text.trim().is_empty() {
            return Err(InventoryError::EmptyText {
                row,
                id: item.id.clone(),
            });
        }
    }
    for dimension in Trait::ALL {
        if !inv.items.iter().any(|i| i.dimension == dimension) {
            return Err(InventoryError::MissingTrait { dimension });
        }
    }
    Ok(())
}

impl Inventory {
    /// Total item count, `m` in the metric formulas.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&InventoryItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Serialize back to the on-disk JSON schema (pretty, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("inventory serializes");
        s.push('\n');
        s
    }

    /// Clone with item texts replaced by paraphrase variant `index`.
    /// Every item must have a variant at that index.
    pub fn with_paraphrases(
        &self,
        set: &ParaphraseSet,
        index: usize,
    ) -> Result<Inventory, InventoryError> {
        if set.inventory != self.name {
            return Err(InventoryError::InventoryMismatch {
                expected: self.name.clone(),
                got: set.inventory.clone(),
            });
        }
        let mut out = self.clone();
        for item in &mut out.items {
            let texts =
                set.variants
                    .get(&item.id)
                    .ok_or_else(|| InventoryError::MissingParaphrase {
                        id: item.id.clone(),
                        index,
                    })?;
            let text = texts
                .get(index)
                .ok_or_else(|| InventoryError::MissingParaphrase {
                    id: item.id.clone(),
                    index,
                })?;
            item.text = text.clone();
        }
        Ok(out)
    }
}

/// Per-trait item counts (`N_d`). Counts always sum to the item total.
pub fn items_per_trait(inv: &Inventory) -> BTreeMap<Trait, usize> {
    let mut counts: BTreeMap<Trait, usize> = Trait::ALL.iter().map(|&t| (t, 0)).collect();
    for item in &inv.items {
        *counts.get_mut(&item.dimension).expect("all traits present") += 1;
    }
    counts
}

/// Load a paraphrase sidecar file and check every referenced id against the
/// inventory.
pub fn load_paraphrases(
    path: impl AsRef<Path>,
    inv: &Inventory,
) -> Result<ParaphraseSet, InventoryError> {
    let set: ParaphraseSet = read_json(path.as_ref())?;
    if set.schema_version != SCHEMA_VERSION {
        return Err(InventoryError::SchemaVersion {
            got: set.schema_version,
        });
    }
    if set.inventory != inv.name {
        return Err(InventoryError::InventoryMismatch {
            expected: inv.name.clone(),
            got: set.inventory.clone(),
        });
    }
    for (id, texts) in &set.variants {
        if inv.item(id).is_none() {
            return Err(InventoryError::UnknownParaphraseId { id: id.clone() });
        }
        if texts.is_empty() {
            return Err(InventoryError::EmptyParaphrases { id: id.clone() });
        }
    }
    Ok(set)
}

/// Load a pair file, rejecting unknown ids, self-pairs, and repeats
/// (unordered: (a,b) duplicates (b,a)).
pub fn load_pairs(path: impl AsRef<Path>, inv: &Inventory) -> Result<PairFile, InventoryError> {
    let file: PairFile = read_json(path.as_ref())?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(InventoryError::SchemaVersion {
            got: file.schema_version,
        });
    }
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (idx, (a, b)) in file.pairs.iter().enumerate() {
        let row = idx + 1;
        for id in [a, b] {
            if inv.item(id).is_none() {
                return Err(InventoryError::UnknownPairId {
                    row,
                    id: id.clone(),
                });
            }
        }
        if a == b {
            return Err(InventoryError::SelfPair { row, id: a.clone() });
        }
        let norm = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        if !seen.insert(norm) {
            return Err(InventoryError::DuplicatePair {
                row,
                a: a.clone(),
                b: b.clone(),
            });
        }
    }
    Ok(file)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::io::Write;

    fn toy_json() -> String {
        let items: Vec<String> = [
            ("q1", "have a vivid imagination", "O", 1),
            ("q2", "do not like poetry", "O", -1),
            ("q3", "complete tasks successfully", "C", 1),
            ("q4", "leave your belongings around", "C", -1),
            ("q5", "take charge", "E", 1),
            ("q6", "keep in the background", "E", -1),
            ("q7", "trust what people say", "A", 1),
            ("q8", "distrust people", "A", -1),
            ("q9", "worry about things", "N", 1),
            ("q10", "remain calm under pressure", "N", -1),
        ]
        .iter()
        .map(|(id, text, tr, key)| {
            format!(r#"{{"id":"{id}","text":"{text}","trait":"{tr}","key":{key}}}"#)
        })
        .collect();
        format!(
            r#"{{"schema_version":1,"name":"toy-10","items":[{}]}}"#,
            items.join(",")
        )
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    /// Balanced 10-item inventory (2 per trait, one +key one −key) shared by
    /// tests across the crate.
    pub(crate) fn toy_inventory() -> Inventory {
        let f = write_temp(&toy_json());
        load_inventory(f.path()).unwrap()
    }

    #[test]
    fn loads_valid_inventory() {
        let inv = toy_inventory();
        assert_eq!(inv.len(), 10);
        assert_eq!(inv.items[0].id, "q1");
        assert_eq!(inv.items[1].key, Key::Minus);
        assert_eq!(inv.items[4].dimension, Trait::E);
    }

    #[test]
    fn single_valid_item_fails_trait_coverage() {
        let json = r#"{"schema_version":1,"name":"one","items":[
            {"id":"q1","text":"worry about things","trait":"N","key":1}]}"#;
        let f = write_temp(json);
        let err = load_inventory(f.path()).unwrap_err();
        assert!(matches!(
            err,
            InventoryError::MissingTrait {
                dimension: Trait::O
            }
        ));
    }

    #[test]
    fn minimal_five_item_inventory_loads() {
        let json = r#"{"schema_version":1,"name":"five","items":[
            {"id":"a","text":"t","trait":"O","key":1},
            {"id":"b","text":"t","trait":"C","key":1},
            {"id":"c","text":"t","trait":"E","key":1},
            {"id":"d","text":"t","trait":"A","key":1},
            {"id":"e","text":"t","trait":"N","key":-1}]}"#;
        let f = write_temp(json);
        let inv = load_inventory(f.path()).unwrap();
        assert_eq!(inv.len(), 5);
    }

    #[test]
    fn unknown_trait_names_position() {
        let json = toy_json().replace(r#""trait":"E""#, r#""trait":"X""#);
        let f = write_temp(&json);
        let err = load_inventory(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown variant"), "got: {msg}");
        assert!(msg.contains("line"), "got: {msg}");
    }

    #[test]
    fn bad_key_sign_rejected() {
        let json = toy_json().replace(r#""key":-1"#, r#""key":-2"#);
        let f = write_temp(&json);
        let err = load_inventory(f.path()).unwrap_err();
        assert!(err.to_string().contains("key sign"), "got: {err}");
    }

    #[test]
    fn duplicate_id_names_row_and_id() {
        let json = toy_json().replace(r#""id":"q10""#, r#""id":"q9""#);
        let f = write_temp(&json);
        let err = load_inventory(f.path()).unwrap_err();
        match err {
            InventoryError::DuplicateId { row, id } => {
                assert_eq!(row, 10);
                assert_eq!(id, "q9");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn empty_items_rejected() {
        let f = write_temp(r#"{"schema_version":1,"name":"x","items":[]}"#);
        assert!(matches!(
            load_inventory(f.path()).unwrap_err(),
            InventoryError::Empty
        ));
    }

    #[test]
    fn counts_per_trait_sum_to_total() {
        let inv = toy_inventory();
        let counts = items_per_trait(&inv);
        assert_eq!(counts.values().sum::<usize>(), inv.len());
        for t in Trait::ALL {
            assert_eq!(counts[&t], 2);
        }
    }

    #[test]
    fn round_trip_preserves_structure() {
        let inv = toy_inventory();
        let f = write_temp(&inv.to_json());
        let again = load_inventory(f.path()).unwrap();
        assert_eq!(inv, again);
        // Same semantic content as the original file, whitespace aside.
        let a: serde_json::Value = serde_json::from_str(&toy_json()).unwrap();
        let b: serde_json::Value = serde_json::from_str(&inv.to_json()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pairs_load_and_validate() {
        let inv = toy_inventory();
        let f = write_temp(
            r#"{"schema_version":1,"kind":"logically-inconsistent","pairs":[["q7","q8"],["q9","q10"]]}"#,
        );
        let pairs = load_pairs(f.path(), &inv).unwrap();
        assert_eq!(pairs.pairs.len(), 2);
        assert_eq!(pairs.kind, PairKind::LogicallyInconsistent);
    }

    #[test]
    fn pair_with_unknown_id_names_it() {
        let inv = toy_inventory();
        let f = write_temp(
            r#"{"schema_version":1,"kind":"semantically-similar","pairs":[["q1","q999"]]}"#,
        );
        let err = load_pairs(f.path(), &inv).unwrap_err();
        assert!(err.to_string().contains("q999"), "got: {err}");
    }

    #[test]
    fn self_pair_rejected() {
        let inv = toy_inventory();
        let f = write_temp(
            r#"{"schema_version":1,"kind":"semantically-similar","pairs":[["q1","q1"]]}"#,
        );
        assert!(matches!(
            load_pairs(f.path(), &inv).unwrap_err(),
            InventoryError::SelfPair { .. }
        ));
    }

    #[test]
    fn reversed_duplicate_pair_rejected() {
        let inv = toy_inventory();
        let f = write_temp(
            r#"{"schema_version":1,"kind":"semantically-similar","pairs":[["q1","q2"],["q2","q1"]]}"#,
        );
        assert!(matches!(
            load_pairs(f.path(), &inv).unwrap_err(),
            InventoryError::DuplicatePair { .. }
        ));
    }

    #[test]
    fn paraphrases_validate_ids_and_apply() {
        let inv = toy_inventory();
        let variants: Vec<String> = inv
            .items
            .iter()
            .map(|i| format!(r#""{}":["{} (alt one)","{} (alt two)"]"#, i.id, i.text, i.text))
            .collect();
        let json = format!(
            r#"{{"schema_version":1,"inventory":"toy-10","variants":{{{}}}}}"#,
            variants.join(",")
        );
        let f = write_temp(&json);
        let set = load_paraphrases(f.path(), &inv).unwrap();
        let rewritten = inv.with_paraphrases(&set, 1).unwrap();
        assert_eq!(rewritten.items[0].text, "have a vivid imagination (alt two)");
        assert_eq!(rewritten.items[0].id, inv.items[0].id);
        assert!(inv.with_paraphrases(&set, 2).is_err());
    }

    #[test]
    fn paraphrase_unknown_id_rejected() {
        let inv = toy_inventory();
        let f =
            write_temp(r#"{"schema_version":1,"inventory":"toy-10","variants":{"q999":["x"]}}"#);
        let err = load_paraphrases(f.path(), &inv).unwrap_err();
        assert!(matches!(err, InventoryError::UnknownParaphraseId { .. }));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let json = toy_json().replace(r#""schema_version":1"#, r#""schema_version":2"#);
        let f = write_temp(&json);
        assert!(matches!(
            load_inventory(f.path()).unwrap_err(),
            InventoryError::SchemaVersion { got: 2 }
        ));
    }
}
