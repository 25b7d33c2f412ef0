//! Statistical validation suite: correlations, reliability coefficients,
//! and condition-differentiation tests over collected metric values.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rectangular observations: rows are observation units, columns repeated
/// measures (trials) or metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<SampleMatrix, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::TooFew {
                what: "rows",
                need: 2,
                got: rows.len(),
            });
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(StatsError::NotRectangular);
        }
        Ok(SampleMatrix {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.values[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatMethod {
    Pearson,
    Spearman,
    WelchT,
    WilcoxonSignedRank,
    OneWayAnova,
}

/// A test statistic with its two-sided p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub method: StatMethod,
}

/// The condition-differentiation bundle: Welch t, paired Wilcoxon
/// signed-rank (when the groups pair up), one-way ANOVA, and Cohen's d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTests {
    pub t_test: TestResult,
    pub wilcoxon: Option<TestResult>,
    pub anova: TestResult,
    pub cohens_d: f64,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("sample lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("matrix rows have unequal lengths")]
    NotRectangular,
    #[error("degenerate variance in {which}")]
    DegenerateVariance { which: &'static str },
    #[error("all paired differences are zero")]
    AllZeroDiffs,
    #[error("domain violation: {0}")]
    Domain(String),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn correlation(x: &[f64], y: &[f64], which: StatMethod) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { a: x.len(), b: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew {
            what: "observations",
            need: 3,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance {
            which: "correlation input",
        });
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if 1.0 - r * r < 1e-15 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        special::t_two_sided_p(t, df)?
    };
    Ok(TestResult {
        statistic: r,
        p_value: p,
        effect_size: Some(r),
        method: which,
    })
}

/// Pearson correlation with a two-sided p via the t transform on n−2
/// degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    correlation(x, y, StatMethod::Pearson)
}

/// Spearman rank correlation (average ranks for ties), p via the same
/// t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { a: x.len(), b: y.len() });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    correlation(&rx, &ry, StatMethod::Spearman)
}

/// Cronbach's alpha with trials as items: `k/(k−1) · (1 − Σ item variances /
/// total-score variance)`, sample variances throughout.
pub fn cronbach_alpha(m: &SampleMatrix) -> Result<f64, StatsError> {
    if m.cols < 2 {
        return Err(StatsError::TooFew {
            what: "columns",
            need: 2,
            got: m.cols,
        });
    }
    let item_vars: f64 = (0..m.cols).map(|j| sample_var(&m.column(j))).sum();
    let total_var = sample_var(&m.row_sums());
    if total_var == 0.0 {
        return Err(StatsError::DegenerateVariance {
            which: "total score",
        });
    }
    let k = m.cols as f64;
    Ok(k / (k - 1.0) * (1.0 - item_vars / total_var))
}

/// Test-retest reliability: mean Pearson correlation over all column pairs.
pub fn test_retest(m: &SampleMatrix) -> Result<f64, StatsError> {
    if m.cols < 2 {
        return Err(StatsError::TooFew {
            what: "columns",
            need: 2,
            got: m.cols,
        });
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..m.cols {
        for j in (i + 1)..m.cols {
            total += pearson(&m.column(i), &m.column(j))?.statistic;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Welch two-sample t-test, two-sided.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    check_group(a)?;
    check_group(b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a), sample_var(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return Err(StatsError::DegenerateVariance { which: "both groups" });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: special::t_two_sided_p(t, df)?,
        effect_size: None,
        method: StatMethod::WelchT,
    })
}

const WILCOXON_EXACT_LIMIT: usize = 25;

/// Paired Wilcoxon signed-rank test on `a_i − b_i`, two-sided. Zero
/// differences drop; exact null distribution up to n = 25, normal
/// approximation with tie correction and continuity correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    check_group(a)?;
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDiffs);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    let p = if n <= WILCOXON_EXACT_LIMIT {
        exact_signed_rank_p(&ranks, w_plus)
    } else {
        // Tie-corrected normal approximation with continuity correction.
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        var -= tie_correction(&abs) / 48.0;
        let sigma = var.sqrt();
        if sigma == 0.0 {
            return Err(StatsError::DegenerateVariance { which: "ranks" });
        }
        let cc = 0.5 * (w_plus - mu).signum();
        let z = (w_plus - mu - cc) / sigma;
        (2.0 * (1.0 - special::normal_cdf(z.abs()))).min(1.0)
    };

    Ok(TestResult {
        statistic: w_plus,
        p_value: p,
        effect_size: None,
        method: StatMethod::WilcoxonSignedRank,
    })
}

fn tie_correction(abs_diffs: &[f64]) -> f64 {
    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Exact two-sided p for W+ by dynamic programming over doubled ranks
/// (average ranks are half-integers; doubling makes them exact integers).
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2 = (2.0 * w_plus).round() as usize;
    let denom = 2f64.powi(ranks.len() as i32);
    let le: u64 = counts[..=w2.min(total)].iter().sum();
    let ge: u64 = counts[w2.min(total)..].iter().sum();
    let p = 2.0 * (le as f64).min(ge as f64) / denom;
    p.min(1.0)
}

/// One-way ANOVA F-test over two groups.
pub fn one_way_anova(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    check_group(a)?;
    check_group(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let grand = (ma * na + mb * nb) / (na + nb);
    let ssb = na * (ma - grand).powi(2) + nb * (mb - grand).powi(2);
    let ssw: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
        + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let d1 = 1.0;
    let d2 = na + nb - 2.0;
    if ssw == 0.0 {
        return Err(StatsError::DegenerateVariance { which: "within groups" });
    }
    let f = (ssb / d1) / (ssw / d2);
    Ok(TestResult {
        statistic: f,
        p_value: special::f_sf(f, d1, d2)?,
        effect_size: None,
        method: StatMethod::OneWayAnova,
    })
}

/// Cohen's d with pooled standard deviation, signed as `mean(a) − mean(b)`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_group(a)?;
    check_group(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        if mean(a) == mean(b) {
            return Ok(0.0);
        }
        return Err(StatsError::DegenerateVariance { which: "pooled" });
    }
    Ok((mean(a) - mean(b)) / pooled)
}

fn check_group(g: &[f64]) -> Result<(), StatsError> {
    if g.len() < 2 {
        return Err(StatsError::TooFew {
            what: "observations",
            need: 2,
            got: g.len(),
        });
    }
    Ok(())
}

/// The full condition-sensitivity bundle comparing two metric samples
/// (conventionally dependent-first, so signs read as dependent − free).
pub fn condition_tests(a: &[f64], b: &[f64]) -> Result<ConditionTests, StatsError> {
    let t_test = welch_t(a, b)?;
    let anova = one_way_anova(a, b)?;
    let d = cohens_d(a, b)?;
    let wilcoxon = if a.len() == b.len() {
        Some(wilcoxon_signed_rank(a, b)?)
    } else {
        None
    };
    Ok(ConditionTests {
        t_test,
        wilcoxon,
        anova,
        cohens_d: d,
    })
}
