//! Consistency metrics over sets of runs.
//!
//! TAR and ED compare trajectories pointwise. TC smooths, normalizes, and
//! GP-fits each trajectory, then integrates the intersection-over-union of
//! the posterior support intervals across the question axis. OC applies the
//! same pipeline to trait-permutation expansions of OCEAN vectors, and the
//! alignment metrics reuse OC between a human-annotated and a model-derived
//! profile.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::gp::{self, GpError};
use crate::inventory::{Inventory, Trait, SCHEMA_VERSION};
use crate::scoring::{self, OceanScore, ScoringError, ScoringTrajectory};

/// A closed interval `[lo, hi]` with `hi ≥ lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        debug_assert!(hi >= lo, "interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Width of the common intersection: `max(0, min hiᵢ − max loᵢ)`.
pub fn intersect_width(intervals: &[Interval]) -> f64 {
    debug_assert!(intervals.len() >= 2);
    let min_hi = intervals.iter().map(|i| i.hi).fold(f64::INFINITY, f64::min);
    let max_lo = intervals
        .iter()
        .map(|i| i.lo)
        .fold(f64::NEG_INFINITY, f64::max);
    (min_hi - max_lo).max(0.0)
}

/// Total length covered by the union: sort by lower bound, sweep-merge
/// overlapping or touching intervals, sum merged lengths.
pub fn union_width(intervals: &[Interval]) -> f64 {
    debug_assert!(!intervals.is_empty());
    let mut sorted: Vec<Interval> = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut total = 0.0;
    let mut cur = sorted[0];
    for iv in &sorted[1..] {
        if iv.lo <= cur.hi {
            cur.hi = cur.hi.max(iv.hi);
        } else {
            total += cur.width();
            cur = *iv;
        }
    }
    total + cur.width()
}

/// Consistency metrics for one factor's run set, with run provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub schema_version: u32,
    pub factor: String,
    pub run_ids: Vec<String>,
    /// Percentage of items where all runs agree exactly.
    pub tar: f64,
    /// Mean pairwise absolute score distance per item.
    pub ed: f64,
    /// Trajectory consistency, percent.
    pub tc: f64,
    /// OCEAN consistency, percent.
    pub oc: f64,
    pub settings: BTreeMap<String, String>,
}

/// Alignment of a model profile against a human-annotated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// OCEAN alignment, percent.
    pub oa: f64,
    /// Mean absolute error over unmasked traits.
    pub mae: f64,
    pub masked_traits: Vec<Trait>,
}

/// Declared value range of a trait profile. Profiles are only comparable on
/// matching scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueScale {
    pub min: f64,
    pub max: f64,
}

/// A five-trait score vector with its declared scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitProfile {
    /// Values in canonical O, C, E, A, N order.
    pub scores: [f64; 5],
    pub scale: ValueScale,
}

impl TraitProfile {
    pub fn from_ocean(ocean: &OceanScore) -> TraitProfile {
        TraitProfile {
            scores: ocean.as_array(),
            scale: ValueScale { min: 1.0, max: 5.0 },
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least {need} runs, got {got}")]
    TooFewRuns { need: usize, got: usize },
    #[error("trajectory lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("trajectories disagree on item order at position {position}")]
    OrderMismatch { position: usize },
    #[error("series too short for consistency analysis: {got} < 2")]
    SeriesTooShort { got: usize },
    #[error("profiles declare different scales: [{0}, {1}] vs [{2}, {3}]")]
    ScaleMismatch(f64, f64, f64, f64),
    #[error("all traits are masked")]
    AllTraitsMasked,
    #[error("need at least 2 unmasked traits, got {got}")]
    InsufficientUnmasked { got: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

fn check_aligned(trajs: &[ScoringTrajectory], min_runs: usize) -> Result<(), MetricsError> {
    if trajs.len() < min_runs {
        return Err(MetricsError::TooFewRuns {
            need: min_runs,
            got: trajs.len(),
        });
    }
    let first = &trajs[0];
    for t in &trajs[1..] {
        if t.len() != first.len() {
            return Err(MetricsError::LengthMismatch {
                a: first.len(),
                b: t.len(),
            });
        }
        for (pos, (a, b)) in first.item_ids.iter().zip(&t.item_ids).enumerate() {
            if a != b {
                return Err(MetricsError::OrderMismatch { position: pos + 1 });
            }
        }
    }
    Ok(())
}

/// Total agreement rate: percentage of positions where every run chose the
/// same score.
pub fn tar(trajs: &[ScoringTrajectory]) -> Result<f64, MetricsError> {
    check_aligned(trajs, 2)?;
    let m = trajs[0].len();
    if m == 0 {
        return Err(MetricsError::SeriesTooShort { got: 0 });
    }
    let agree = (0..m)
        .filter(|&k| trajs.iter().all(|t| t.scores[k] == trajs[0].scores[k]))
        .count();
    Ok(100.0 * agree as f64 / m as f64)
}

/// Mean pairwise absolute distance per item: `(1/(P·m)) Σ_k Σ_pairs |difference|`
/// with `P` the number of run pairs.
pub fn ed(trajs: &[ScoringTrajectory]) -> Result<f64, MetricsError> {
    check_aligned(trajs, 2)?;
    let n = trajs.len();
    let m = trajs[0].len();
    if m == 0 {
        return Err(MetricsError::SeriesTooShort { got: 0 });
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mut total = 0.0;
    for k in 0..m {
        for i in 0..n {
            for j in (i + 1)..n {
                total += (trajs[i].scores[k] as f64 - trajs[j].scores[k] as f64).abs();
            }
        }
    }
    Ok(total / (pairs * m as f64))
}

/// Knobs for the TC pipeline. Defaults match the documented metric: window
/// 4, 95% supports, a query grid of `max(200, 4m)` points spanning the data.
#[derive(Debug, Clone, Copy)]
pub struct TcOptions {
    pub window: usize,
    pub z: f64,
    pub min_grid: usize,
    pub grid_per_point: usize,
    /// Unions narrower than this count as degenerate agreement (ratio 1).
    pub eps: f64,
}

impl Default for TcOptions {
    fn default() -> Self {
        TcOptions {
            window: gp::DEFAULT_WINDOW,
            z: gp::DEFAULT_Z,
            min_grid: 200,
            grid_per_point: 4,
            eps: 1e-12,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// TC over raw numeric series (the shared pipeline behind [`tc`] and [`oc`]).
pub fn tc_series(series: &[Vec<f64>], opts: &TcOptions) -> Result<f64, MetricsError> {
    if series.len() < 2 {
        return Err(MetricsError::TooFewRuns {
            need: 2,
            got: series.len(),
        });
    }
    let m = series[0].len();
    for s in series {
        if s.len() != m {
            return Err(MetricsError::LengthMismatch { a: m, b: s.len() });
        }
    }
    if m < 2 {
        return Err(MetricsError::SeriesTooShort { got: m });
    }

    let grid_points = opts.min_grid.max(opts.grid_per_point * m);
    let grid = linspace(1.0, m as f64, grid_points);

    let fitted = exec::par_map(series, |s| -> Result<Vec<(f64, f64)>, MetricsError> {
        let smoothed = gp::smooth_series(s, opts.window)?;
        let post = gp::fit_gpr(&smoothed.xs, &smoothed.ys, &grid)?;
        Ok(gp::support_interval(&post, opts.z))
    });
    let mut supports = Vec::with_capacity(fitted.len());
    for f in fitted {
        supports.push(f?);
    }

    let ratios: Vec<f64> = (0..grid_points)
        .map(|j| {
            let intervals: Vec<Interval> = supports
                .iter()
                .map(|s| Interval::new(s[j].0, s[j].1))
                .collect();
            let w_union = union_width(&intervals);
            if w_union < opts.eps {
                1.0
            } else {
                (intersect_width(&intervals) / w_union).clamp(0.0, 1.0)
            }
        })
        .collect();

    // Trapezoidal mean over the uniform grid.
    let interior: f64 = ratios[1..grid_points - 1].iter().sum();
    let mean = (0.5 * (ratios[0] + ratios[grid_points - 1]) + interior) / (grid_points - 1) as f64;
    Ok(100.0 * mean)
}

/// Trajectory consistency across aligned runs, percent.
pub fn tc(trajs: &[ScoringTrajectory]) -> Result<f64, MetricsError> {
    check_aligned(trajs, 2)?;
    let series: Vec<Vec<f64>> = trajs.iter().map(|t| t.scores_f64()).collect();
    tc_series(&series, &TcOptions::default())
}

fn permutations(values: &[f64]) -> Vec<Vec<f64>> {
    // Heap's algorithm over indices.
    let k = values.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    let mut out = Vec::with_capacity((1..=k).product());
    out.push(idx.iter().map(|&i| values[i]).collect::<Vec<f64>>());
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            out.push(idx.iter().map(|&j| values[j]).collect());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Expand trait values into the order-invariant permutation series: all k!
/// orderings of the k values, sorted lexicographically by value, then
/// concatenated (length k·k!; 600 for the full five traits).
pub fn permutation_series(values: &[f64]) -> Vec<f64> {
    let mut tuples = permutations(values);
    tuples.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    tuples.into_iter().flatten().collect()
}

/// OCEAN consistency: the TC pipeline applied to permutation series of the
/// per-run OCEAN vectors, percent.
pub fn oc(vectors: &[OceanScore]) -> Result<f64, MetricsError> {
    if vectors.len() < 2 {
        return Err(MetricsError::TooFewRuns {
            need: 2,
            got: vectors.len(),
        });
    }
    let series: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| permutation_series(&v.as_array()))
        .collect();
    tc_series(&series, &TcOptions::default())
}

/// OCEAN alignment and mean absolute error between two profiles on matching
/// scales, restricted to unmasked traits.
pub fn ocean_alignment(
    human: &TraitProfile,
    model: &TraitProfile,
    mask: &BTreeSet<Trait>,
) -> Result<AlignmentReport, MetricsError> {
    if human.scale != model.scale {
        return Err(MetricsError::ScaleMismatch(
            human.scale.min,
            human.scale.max,
            model.scale.min,
            model.scale.max,
        ));
    }
    let unmasked: Vec<Trait> = Trait::ALL
        .iter()
        .copied()
        .filter(|t| !mask.contains(t))
        .collect();
    if unmasked.is_empty() {
        return Err(MetricsError::AllTraitsMasked);
    }
    if unmasked.len() < 2 {
        return Err(MetricsError::InsufficientUnmasked {
            got: unmasked.len(),
        });
    }
    let select = |p: &TraitProfile| -> Vec<f64> {
        unmasked.iter().map(|t| p.scores[t.index()]).collect()
    };
    let h = select(human);
    let m = select(model);
    let mae = h
        .iter()
        .zip(&m)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / h.len() as f64;
    let series = [permutation_series(&h), permutation_series(&m)];
    let oa = tc_series(&series, &TcOptions::default())?;
    Ok(AlignmentReport {
        oa,
        mae,
        masked_traits: mask.iter().copied().collect(),
    })
}

/// Assemble the full consistency report for one factor's aligned runs.
pub fn consistency_report(
    factor: &str,
    trajs: &[ScoringTrajectory],
    inv: &Inventory,
    settings: BTreeMap<String, String>,
) -> Result<ConsistencyReport, MetricsError> {
    check_aligned(trajs, 2)?;
    let tar_v = tar(trajs)?;
    let ed_v = ed(trajs)?;
    let tc_v = tc(trajs)?;
    let vectors: Vec<OceanScore> = trajs
        .iter()
        .map(|t| scoring::ocean_score(t, inv))
        .collect::<Result<_, _>>()?;
    let oc_v = oc(&vectors)?;
    Ok(ConsistencyReport {
        schema_version: SCHEMA_VERSION,
        factor: factor.to_string(),
        run_ids: trajs.iter().map(|t| t.run_id.clone()).collect(),
        tar: tar_v,
        ed: ed_v,
        tc: tc_v,
        oc: oc_v,
        settings,
    })
}
