//! Score conversion and aggregation: parsed choices to 1–5 item scores,
//! transcripts to scoring trajectories, trajectories to OCEAN vectors,
//! score-shift histograms, and logical-consistency pair classification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{Inventory, InventoryItem, Key, PairFile, PairKind, Trait};
use crate::prompt::ParsedChoice;
use crate::session::Transcript;

/// The ordered per-item scores of one run, indexed by presentation position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringTrajectory {
    pub run_id: String,
    /// Scores in presentation order, each in 1..=5.
    pub scores: Vec<u8>,
    /// Item ids aligned with `scores`.
    pub item_ids: Vec<String>,
}

impl ScoringTrajectory {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| s as f64).collect()
    }

    pub fn score_of(&self, item_id: &str) -> Option<u8> {
        self.item_ids
            .iter()
            .position(|id| id == item_id)
            .map(|i| self.scores[i])
    }

    /// Reorder to match `target_ids`. Every target id must be present.
    pub fn realign(&self, target_ids: &[String]) -> Result<ScoringTrajectory, ScoringError> {
        let mut scores = Vec::with_capacity(target_ids.len());
        for id in target_ids {
            let score = self
                .score_of(id)
                .ok_or_else(|| ScoringError::MissingItem { id: id.clone() })?;
            scores.push(score);
        }
        Ok(ScoringTrajectory {
            run_id: self.run_id.clone(),
            scores,
            item_ids: target_ids.to_vec(),
        })
    }
}

/// The five per-trait mean scores, each in [1, 5].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OceanScore {
    #[serde(rename = "O")]
    pub o: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl OceanScore {
    pub fn from_array(values: [f64; 5]) -> OceanScore {
        OceanScore {
            o: values[0],
            c: values[1],
            e: values[2],
            a: values[3],
            n: values[4],
        }
    }

    /// Values in canonical O, C, E, A, N order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.o, self.c, self.e, self.a, self.n]
    }

    pub fn get(&self, t: Trait) -> f64 {
        self.as_array()[t.index()]
    }
}

/// Counts of pointwise score differences, bucketed −4..=+4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHistogram {
    pub buckets: BTreeMap<i8, usize>,
}

impl DiffHistogram {
    pub fn total(&self) -> usize {
        self.buckets.values().sum()
    }

    pub fn count(&self, bucket: i8) -> usize {
        self.buckets.get(&bucket).copied().unwrap_or(0)
    }
}

/// Accuracy of one pair classification kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracy {
    pub kind: PairKind,
    pub accurate: usize,
    pub total: usize,
    /// `accurate / total`, in [0, 1].
    pub accuracy: f64,
}

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("transcript {run_id} is invalid: {reason}")]
    InvalidTranscript { run_id: String, reason: String },
    #[error("trajectories disagree on item order at position {position}")]
    OrderMismatch { position: usize },
    #[error("trajectory lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("item \"{id}\" missing from trajectory")]
    MissingItem { id: String },
    #[error("trajectory does not cover inventory \"{name}\" exactly once")]
    CoverageMismatch { name: String },
}

/// Convert a semantic choice into the keyed 1–5 score: agreeing with a
/// positively keyed item scores 5, with a negatively keyed item scores 1.
pub fn score_response(item: &InventoryItem, choice: &ParsedChoice) -> u8 {
    debug_assert!(choice.semantic_index < 5);
    let s = choice.semantic_index as u8;
    match item.key {
        Key::Plus => 5 - s,
        Key::Minus => 1 + s,
    }
}

/// Extract the trajectory of a complete, valid transcript.
pub fn trajectory_from_transcript(t: &Transcript) -> Result<ScoringTrajectory, ScoringError> {
    if t.invalid {
        return Err(ScoringError::InvalidTranscript {
            run_id: t.run_id.clone(),
            reason: t
                .error
                .clone()
                .unwrap_or_else(|| "marked invalid".to_string()),
        });
    }
    let mut scores = Vec::with_capacity(t.entries.len());
    let mut item_ids = Vec::with_capacity(t.entries.len());
    for entry in &t.entries {
        let score = entry.score.ok_or_else(|| ScoringError::InvalidTranscript {
            run_id: t.run_id.clone(),
            reason: format!("missing score for item \"{}\"", entry.item_id),
        })?;
        scores.push(score);
        item_ids.push(entry.item_id.clone());
    }
    Ok(ScoringTrajectory {
        run_id: t.run_id.clone(),
        scores,
        item_ids,
    })
}

/// Per-trait mean of item scores.
pub fn ocean_score(traj: &ScoringTrajectory, inv: &Inventory) -> Result<OceanScore, ScoringError> {
    if traj.len() != inv.len() {
        return Err(ScoringError::CoverageMismatch {
            name: inv.name.clone(),
        });
    }
    let mut sums = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for (id, &score) in traj.item_ids.iter().zip(&traj.scores) {
        let item = inv
            .item(id)
            .ok_or_else(|| ScoringError::MissingItem { id: id.clone() })?;
        let t = item.dimension.index();
        sums[t] += score as f64;
        counts[t] += 1;
    }
    let mut values = [0.0f64; 5];
    for i in 0..5 {
        if counts[i] == 0 {
            return Err(ScoringError::CoverageMismatch {
                name: inv.name.clone(),
            });
        }
        values[i] = sums[i] / counts[i] as f64;
    }
    Ok(OceanScore::from_array(values))
}

/// Histogram of `dep − free` per item. Both trajectories must list the same
/// items in the same presentation order.
pub fn diff_histogram(
    dep: &ScoringTrajectory,
    free: &ScoringTrajectory,
) -> Result<DiffHistogram, ScoringError> {
    if dep.len() != free.len() {
        return Err(ScoringError::LengthMismatch {
            a: dep.len(),
            b: free.len(),
        });
    }
    let mut buckets: BTreeMap<i8, usize> = (-4..=4).map(|b| (b, 0)).collect();
    for (pos, ((a_id, b_id), (&a, &b))) in dep
        .item_ids
        .iter()
        .zip(&free.item_ids)
        .zip(dep.scores.iter().zip(&free.scores))
        .enumerate()
    {
        if a_id != b_id {
            return Err(ScoringError::OrderMismatch { position: pos + 1 });
        }
        let diff = a as i8 - b as i8;
        *buckets.get_mut(&diff).expect("diff in -4..=4") += 1;
    }
    Ok(DiffHistogram { buckets })
}

/// Classify every pair against the trajectory's keyed scores.
///
/// A semantically similar pair counts as accurate when both scores sit on
/// the same side of the 2.5 midline; a logically inconsistent pair counts
/// when they sit on opposite sides. Integer scores never equal 2.5, so the
/// classification is total.
pub fn logical_consistency(
    pairs: &PairFile,
    traj: &ScoringTrajectory,
) -> Result<PairAccuracy, ScoringError> {
    let mut accurate = 0usize;
    for (a, b) in &pairs.pairs {
        let sa = traj
            .score_of(a)
            .ok_or_else(|| ScoringError::MissingItem { id: a.clone() })? as f64;
        let sb = traj
            .score_of(b)
            .ok_or_else(|| ScoringError::MissingItem { id: b.clone() })? as f64;
        let hit = match pairs.kind {
            PairKind::SemanticallySimilar => (sa > 2.5 && sb > 2.5) || (sa < 2.5 && sb < 2.5),
            PairKind::LogicallyInconsistent => (sa - 2.5) * (sb - 2.5) < 0.0,
        };
        if hit {
            accurate += 1;
        }
    }
    let total = pairs.pairs.len();
    Ok(PairAccuracy {
        kind: pairs.kind,
        accurate,
        total,
        accuracy: if total == 0 {
            0.0
        } else {
            accurate as f64 / total as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::tests::toy_inventory;

    fn choice(semantic: usize) -> ParsedChoice {
        ParsedChoice {
            semantic_index: semantic,
            presented_label: "A".into(),
            raw_text: String::new(),
        }
    }

    fn item(key: Key) -> InventoryItem {
        InventoryItem {
            id: "x".into(),
            text: "t".into(),
            dimension: Trait::O,
            key,
        }
    }

    fn traj(ids: &[&str], scores: &[u8]) -> ScoringTrajectory {
        ScoringTrajectory {
            run_id: "r".into(),
            scores: scores.to_vec(),
            item_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn keying_truth_table() {
        // +key: semantic 0 (most agree) scores 5 ... semantic 4 scores 1.
        for s in 0..5 {
            assert_eq!(score_response(&item(Key::Plus), &choice(s)), 5 - s as u8);
            assert_eq!(score_response(&item(Key::Minus), &choice(s)), 1 + s as u8);
            // Complementarity: opposite keys sum to 6 at every level.
            assert_eq!(
                score_response(&item(Key::Plus), &choice(s))
                    + score_response(&item(Key::Minus), &choice(s)),
                6
            );
        }
        assert_eq!(score_response(&item(Key::Plus), &choice(2)), 3);
        assert_eq!(score_response(&item(Key::Minus), &choice(2)), 3);
    }

    #[test]
    fn ocean_score_means_per_trait() {
        let inv = toy_inventory();
        // q1 (O) = 5, q2 (O) = 3, everything else 2.
        let ids: Vec<&str> = inv.items.iter().map(|i| i.id.as_str()).collect();
        let scores: Vec<u8> = inv
            .items
            .iter()
            .map(|i| match i.id.as_str() {
                "q1" => 5,
                "q2" => 3,
                _ => 2,
            })
            .collect();
        let t = traj(&ids, &scores);
        let ocean = ocean_score(&t, &inv).unwrap();
        assert_eq!(ocean.o, 4.0);
        assert_eq!(ocean.c, 2.0);
        assert_eq!(ocean.n, 2.0);
    }

    #[test]
    fn ocean_score_extremes() {
        let inv = toy_inventory();
        let ids: Vec<&str> = inv.items.iter().map(|i| i.id.as_str()).collect();
        let all5 = traj(&ids, &vec![5; inv.len()]);
        assert_eq!(ocean_score(&all5, &inv).unwrap().as_array(), [5.0; 5]);
        let all1 = traj(&ids, &vec![1; inv.len()]);
        assert_eq!(ocean_score(&all1, &inv).unwrap().as_array(), [1.0; 5]);
    }

    #[test]
    fn ocean_score_order_invariant_within_trait() {
        let inv = toy_inventory();
        let ids: Vec<&str> = inv.items.iter().map(|i| i.id.as_str()).collect();
        let scores: Vec<u8> = (0..inv.len()).map(|i| (i % 5 + 1) as u8).collect();
        let t = traj(&ids, &scores);
        let base = ocean_score(&t, &inv).unwrap();
        // Reverse presentation order entirely; per-trait means are unchanged.
        let rev_ids: Vec<&str> = ids.iter().rev().cloned().collect();
        let rev_scores: Vec<u8> = scores.iter().rev().cloned().collect();
        let t2 = traj(&rev_ids, &rev_scores);
        assert_eq!(ocean_score(&t2, &inv).unwrap(), base);
    }

    #[test]
    fn ocean_score_rejects_partial_coverage() {
        let inv = toy_inventory();
        let t = traj(&["q1"], &[5]);
        assert!(matches!(
            ocean_score(&t, &inv),
            Err(ScoringError::CoverageMismatch { .. })
        ));
    }

    #[test]
    fn diff_histogram_buckets() {
        let a = traj(&["q1", "q2"], &[1, 3]);
        let b = traj(&["q1", "q2"], &[5, 3]);
        let h = diff_histogram(&a, &b).unwrap();
        assert_eq!(h.count(-4), 1);
        assert_eq!(h.count(0), 1);
        assert_eq!(h.total(), 2);

        let single_a = traj(&["q1"], &[5]);
        let single_b = traj(&["q1"], &[1]);
        let h2 = diff_histogram(&single_a, &single_b).unwrap();
        assert_eq!(h2.count(4), 1);
    }

    #[test]
    fn diff_histogram_identity_concentrates_at_zero() {
        let a = traj(&["q1", "q2", "q3"], &[2, 4, 5]);
        let h = diff_histogram(&a, &a).unwrap();
        assert_eq!(h.count(0), 3);
        assert_eq!(h.total(), 3);
        assert_eq!(h.buckets.len(), 9);
    }

    #[test]
    fn diff_histogram_rejects_order_mismatch() {
        let a = traj(&["q1", "q2"], &[1, 2]);
        let b = traj(&["q2", "q1"], &[1, 2]);
        assert!(matches!(
            diff_histogram(&a, &b),
            Err(ScoringError::OrderMismatch { position: 1 })
        ));
        let realigned = b.realign(&a.item_ids).unwrap();
        assert!(diff_histogram(&a, &realigned).is_ok());
    }

    #[test]
    fn logical_consistency_examples() {
        let inv = toy_inventory();
        let similar = PairFile {
            schema_version: 1,
            kind: PairKind::SemanticallySimilar,
            pairs: vec![("q1".into(), "q2".into())],
        };
        let inconsistent = PairFile {
            schema_version: 1,
            kind: PairKind::LogicallyInconsistent,
            pairs: vec![("q1".into(), "q2".into())],
        };
        let _ = &inv;
        // Similar pair scoring (4,5): both above midline, accurate.
        let t45 = traj(&["q1", "q2"], &[4, 5]);
        assert_eq!(logical_consistency(&similar, &t45).unwrap().accurate, 1);
        // Inconsistent pair (4,2): opposite polarities, accurate.
        let t42 = traj(&["q1", "q2"], &[4, 2]);
        assert_eq!(
            logical_consistency(&inconsistent, &t42).unwrap().accurate,
            1
        );
        // Inconsistent pair (4,4): same side, inaccurate.
        let t44 = traj(&["q1", "q2"], &[4, 4]);
        let acc = logical_consistency(&inconsistent, &t44).unwrap();
        assert_eq!(acc.accurate, 0);
        assert_eq!(acc.accuracy, 0.0);
    }

    #[test]
    fn logical_consistency_exhaustive_truth_table() {
        let similar = PairFile {
            schema_version: 1,
            kind: PairKind::SemanticallySimilar,
            pairs: vec![("a".into(), "b".into())],
        };
        let inconsistent = PairFile {
            schema_version: 1,
            kind: PairKind::LogicallyInconsistent,
            pairs: vec![("a".into(), "b".into())],
        };
        for s1 in 1..=5u8 {
            for s2 in 1..=5u8 {
                let t = traj(&["a", "b"], &[s1, s2]);
                let sim = logical_consistency(&similar, &t).unwrap().accurate == 1;
                let inc = logical_consistency(&inconsistent, &t).unwrap().accurate == 1;
                let lo = |s: u8| s <= 2;
                let hi = |s: u8| s >= 3;
                assert_eq!(sim, (hi(s1) && hi(s2)) || (lo(s1) && lo(s2)));
                assert_eq!(inc, (hi(s1) && lo(s2)) || (lo(s1) && hi(s2)));
            }
        }
    }

    #[test]
    fn missing_pair_item_is_an_error() {
        let pairs = PairFile {
            schema_version: 1,
            kind: PairKind::SemanticallySimilar,
            pairs: vec![("a".into(), "zz".into())],
        };
        let t = traj(&["a"], &[3]);
        assert!(matches!(
            logical_consistency(&pairs, &t),
            Err(ScoringError::MissingItem { .. })
        ));
    }
}
