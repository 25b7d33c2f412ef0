//! `cape stats`: statistical validation over collected consistency
//! reports — metric correlations, reliability across repeated trials, and
//! context-dependent vs context-free condition tests.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cape_core::metrics::ConsistencyReport;
use cape_core::stats::{
    cohens_d, condition_tests, cronbach_alpha, one_way_anova, pearson, spearman, test_retest,
    welch_t, SampleMatrix,
};
use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Report files or directories to collect (repeatable).
    #[arg(long = "reports", required = true)]
    pub reports: Vec<PathBuf>,
    /// Output file.
    #[arg(long, default_value = "stats.json")]
    pub out: PathBuf,
}

const METRICS: [&str; 4] = ["TAR", "ED", "TC", "OC"];

fn metric_value(r: &ConsistencyReport, name: &str) -> f64 {
    match name {
        "TAR" => r.tar,
        "ED" => r.ed,
        "TC" => r.tc,
        "OC" => r.oc,
        _ => unreachable!(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub pair: String,
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub metric: String,
    pub cronbach_alpha: f64,
    pub test_retest: f64,
    pub conditions: usize,
    pub trials: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConditionRow {
    pub metric: String,
    pub t_p: f64,
    pub wilcoxon_p: Option<f64>,
    pub anova_p: f64,
    pub cohens_d: f64,
    pub dependent_n: usize,
    pub free_n: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub reports_used: usize,
    pub correlations: Vec<CorrelationRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub condition_tests: Vec<ConditionRow>,
}

fn collect_reports(paths: &[PathBuf]) -> Result<Vec<ConsistencyReport>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in std::fs::read_dir(p)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) == Some("json")
                    && path.file_name().and_then(|n| n.to_str()) != Some("manifest.json")
                {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    let mut reports = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f)
            .with_context(|| format!("reading report {}", f.display()))?;
        match serde_json::from_str::<ConsistencyReport>(&text) {
            Ok(r) => reports.push(r),
            Err(_) => continue, // not a consistency report; skip quietly
        }
    }
    if reports.is_empty() {
        bail!("no consistency reports found under the given paths");
    }
    Ok(reports)
}

/// Identity of a condition, with the distinguishing key removed.
fn condition_key(r: &ConsistencyReport, drop: &[&str]) -> String {
    let mut parts = vec![format!("factor={}", r.factor)];
    for (k, v) in &r.settings {
        if !drop.contains(&k.as_str()) {
            parts.push(format!("{k}={v}"));
        }
    }
    parts.join("|")
}

pub fn compute(reports: &[ConsistencyReport]) -> Result<StatsReport> {
    // Correlations of the proposed metrics against the baselines.
    let mut correlations = Vec::new();
    if reports.len() >= 3 {
        for proposed in ["TC", "OC"] {
            for baseline in ["TAR", "ED"] {
                let xs: Vec<f64> = reports.iter().map(|r| metric_value(r, proposed)).collect();
                let ys: Vec<f64> = reports.iter().map(|r| metric_value(r, baseline)).collect();
                if let (Ok(p), Ok(s)) = (pearson(&xs, &ys), spearman(&xs, &ys)) {
                    correlations.push(CorrelationRow {
                        pair: format!("{proposed} vs {baseline}"),
                        pearson_r: p.statistic,
                        pearson_p: p.p_value,
                        spearman_rho: s.statistic,
                        spearman_p: s.p_value,
                    });
                }
            }
        }
    }

    // Reliability: rows are conditions, columns are repeated trials (the
    // `trial` setting).
    let mut by_condition: BTreeMap<String, BTreeMap<String, &ConsistencyReport>> = BTreeMap::new();
    for r in reports {
        if let Some(trial) = r.settings.get("trial") {
            by_condition
                .entry(condition_key(r, &["trial"]))
                .or_default()
                .insert(trial.clone(), r);
        }
    }
    let trial_counts: Vec<usize> = by_condition.values().map(|m| m.len()).collect();
    let mut reliability = Vec::new();
    if by_condition.len() >= 2 && trial_counts.iter().all(|&c| c >= 2) {
        let n_trials = trial_counts[0];
        if trial_counts.iter().all(|&c| c == n_trials) {
            for metric in METRICS {
                let rows: Vec<Vec<f64>> = by_condition
                    .values()
                    .map(|trials| {
                        trials.values().map(|r| metric_value(r, metric)).collect()
                    })
                    .collect();
                let matrix = SampleMatrix::from_rows(rows)?;
                if let (Ok(alpha), Ok(retest)) = (cronbach_alpha(&matrix), test_retest(&matrix)) {
                    reliability.push(ReliabilityRow {
                        metric: metric.to_string(),
                        cronbach_alpha: alpha,
                        test_retest: retest,
                        conditions: by_condition.len(),
                        trials: n_trials,
                    });
                }
            }
        }
    }

    // Condition differentiation: context-dependent vs context-free values,
    // paired by the remaining condition identity.
    let mut paired: BTreeMap<String, (Option<&ConsistencyReport>, Option<&ConsistencyReport>)> =
        BTreeMap::new();
    for r in reports {
        let Some(mode) = r.settings.get("mode") else {
            continue;
        };
        let key = condition_key(r, &["mode"]);
        let slot = paired.entry(key).or_insert((None, None));
        match mode.as_str() {
            "context-dependent" => slot.0 = Some(r),
            "context-free" => slot.1 = Some(r),
            _ => {}
        }
    }
    let complete: Vec<(&ConsistencyReport, &ConsistencyReport)> = paired
        .values()
        .filter_map(|(d, f)| Some((d.as_ref().copied()?, f.as_ref().copied()?)))
        .collect();
    let mut condition_rows = Vec::new();
    if complete.len() >= 2 {
        for metric in METRICS {
            let dep: Vec<f64> = complete.iter().map(|(d, _)| metric_value(d, metric)).collect();
            let free: Vec<f64> = complete.iter().map(|(_, f)| metric_value(f, metric)).collect();
            // A failed Wilcoxon (e.g. all paired differences zero) must not
            // take the parametric tests down with it.
            let row = match condition_tests(&dep, &free) {
                Ok(tests) => ConditionRow {
                    metric: metric.to_string(),
                    t_p: tests.t_test.p_value,
                    wilcoxon_p: tests.wilcoxon.map(|w| w.p_value),
                    anova_p: tests.anova.p_value,
                    cohens_d: tests.cohens_d,
                    dependent_n: dep.len(),
                    free_n: free.len(),
                },
                Err(_) => {
                    let (Ok(t), Ok(f), Ok(d)) = (
                        welch_t(&dep, &free),
                        one_way_anova(&dep, &free),
                        cohens_d(&dep, &free),
                    ) else {
                        continue;
                    };
                    ConditionRow {
                        metric: metric.to_string(),
                        t_p: t.p_value,
                        wilcoxon_p: None,
                        anova_p: f.p_value,
                        cohens_d: d,
                        dependent_n: dep.len(),
                        free_n: free.len(),
                    }
                }
            };
            condition_rows.push(row);
        }
    }

    Ok(StatsReport {
        schema_version: 1,
        reports_used: reports.len(),
        correlations,
        reliability,
        condition_tests: condition_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(factor: &str, mode: &str, cond: &str, trial: &str, tc: f64) -> ConsistencyReport {
        let mut settings = BTreeMap::new();
        settings.insert("mode".to_string(), mode.to_string());
        settings.insert("condition".to_string(), cond.to_string());
        settings.insert("trial".to_string(), trial.to_string());
        ConsistencyReport {
            schema_version: 1,
            factor: factor.to_string(),
            run_ids: vec!["r1".into()],
            tar: tc * 0.9,
            ed: 100.0 - tc,
            tc,
            oc: tc * 0.95 + 2.0,
            settings,
        }
    }

    #[test]
    fn condition_rows_pair_dependent_with_free() {
        let mut reports = Vec::new();
        for (i, tc) in [40.0, 55.0, 62.0, 48.0].iter().enumerate() {
            let cond = format!("c{i}");
            reports.push(report("stability", "context-dependent", &cond, "1", tc + 12.0));
            reports.push(report("stability", "context-free", &cond, "1", *tc));
        }
        let stats = compute(&reports).unwrap();
        assert_eq!(stats.condition_tests.len(), 4, "{stats:?}");
        let tc_row = stats
            .condition_tests
            .iter()
            .find(|r| r.metric == "TC")
            .unwrap();
        assert!(tc_row.cohens_d > 0.0, "dependent minus free should be positive");
        assert!(tc_row.wilcoxon_p.is_some());
        assert_eq!(tc_row.dependent_n, 4);
    }

    #[test]
    fn identical_regimes_still_produce_parametric_rows() {
        // History-independent backends make dependent == free exactly; the
        // all-zero-diff Wilcoxon drops but t/ANOVA/d still report.
        let mut reports = Vec::new();
        for (i, tc) in [40.0, 55.0].iter().enumerate() {
            let cond = format!("c{i}");
            reports.push(report("stability", "context-dependent", &cond, "1", *tc));
            reports.push(report("stability", "context-free", &cond, "1", *tc));
        }
        let stats = compute(&reports).unwrap();
        assert_eq!(stats.condition_tests.len(), 4, "{stats:?}");
        for row in &stats.condition_tests {
            assert!(row.wilcoxon_p.is_none());
            assert_eq!(row.cohens_d, 0.0);
            assert!((row.t_p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reliability_rows_from_repeated_trials() {
        let mut reports = Vec::new();
        for (i, base) in [40.0, 55.0, 62.0, 48.0, 71.0].iter().enumerate() {
            let cond = format!("c{i}");
            for trial in 1..=3 {
                reports.push(report(
                    "stability",
                    "context-free",
                    &cond,
                    &trial.to_string(),
                    base + trial as f64,
                ));
            }
        }
        let stats = compute(&reports).unwrap();
        assert_eq!(stats.reliability.len(), 4, "{stats:?}");
        let tc_row = stats.reliability.iter().find(|r| r.metric == "TC").unwrap();
        assert!(tc_row.cronbach_alpha > 0.9, "near-identical trials: {tc_row:?}");
        assert_eq!(tc_row.conditions, 5);
        assert_eq!(tc_row.trials, 3);
    }

    #[test]
    fn correlations_present_with_enough_reports() {
        let reports: Vec<ConsistencyReport> = [35.0, 52.0, 61.0, 44.0, 78.0]
            .iter()
            .enumerate()
            .map(|(i, tc)| report("x", "context-free", &format!("c{i}"), "1", *tc))
            .collect();
        let stats = compute(&reports).unwrap();
        assert_eq!(stats.correlations.len(), 4);
        let tc_tar = &stats.correlations[0];
        assert!(tc_tar.pearson_r > 0.99);
        let tc_ed = &stats.correlations[1];
        assert!(tc_ed.pearson_r < -0.99);
    }
}

pub fn execute(args: &StatsArgs) -> Result<()> {
    let reports = collect_reports(&args.reports)?;
    let stats = compute(&reports)?;
    let mut json = serde_json::to_string_pretty(&stats)?;
    json.push('\n');
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, json)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} reports: {} correlation rows, {} reliability rows, {} condition rows -> {}",
        stats.reports_used,
        stats.correlations.len(),
        stats.reliability.len(),
        stats.condition_tests.len(),
        args.out.display()
    );
    Ok(())
}
