//! `cape plot`: CSV + SVG artifacts for the standard figure kinds. CSV is
//! the contract; SVG is a convenience rendering of the same numbers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cape_core::inventory::Trait;
use cape_core::scoring::{diff_histogram, ocean_score, ScoringTrajectory};
use cape_core::session::Transcript;
use clap::Args;

use crate::manifest::ManifestBuilder;
use crate::runs;
use crate::svg::{csv_table, fmt_f64, Chart, SERIES_COLORS};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Plot kind: trajectory-lines | ocean-bars | diff-distribution |
    /// option-area.
    #[arg(long)]
    pub kind: String,
    /// Run directory (repeatable: each directory becomes one series set).
    #[arg(long = "runs", required = true)]
    pub runs: Vec<PathBuf>,
    /// Split a single directory into labelled series by run-id substring
    /// (repeatable), e.g. `--series before --series after`.
    #[arg(long = "series")]
    pub series: Vec<String>,
    /// Inventory override (ocean-bars).
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "plots")]
    pub out: PathBuf,
    /// Apply quadratic-spline smoothing to option-frequency curves.
    #[arg(long)]
    pub spline: bool,
    /// Question-index bin width for option-area counts.
    #[arg(long, default_value_t = 10)]
    pub bin: usize,
}

struct Series {
    label: String,
    transcripts: Vec<Transcript>,
}

fn gather_series(args: &PlotArgs) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    if args.runs.len() == 1 && !args.series.is_empty() {
        let all = runs::load_transcripts(&args.runs[0])?;
        for tag in &args.series {
            let transcripts: Vec<Transcript> = all
                .iter()
                .filter(|t| t.run_id.contains(tag.as_str()))
                .cloned()
                .collect();
            if transcripts.is_empty() {
                bail!("no runs in {} match series {tag:?}", args.runs[0].display());
            }
            out.push(Series {
                label: tag.clone(),
                transcripts,
            });
        }
    } else {
        for dir in &args.runs {
            let label = dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("runs")
                .to_string();
            out.push(Series {
                label,
                transcripts: runs::load_transcripts(dir)?,
            });
        }
    }
    Ok(out)
}

fn trajectories_of(series: &Series) -> Result<Vec<ScoringTrajectory>> {
    runs::trajectories(&series.transcripts)
}

pub fn execute(args: &PlotArgs, deterministic: bool) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let series = gather_series(args)?;
    let (csv, svg) = match args.kind.as_str() {
        "trajectory-lines" => trajectory_lines(&series, deterministic)?,
        "ocean-bars" => ocean_bars(args, &series, deterministic)?,
        "diff-distribution" => diff_distribution(&series, deterministic)?,
        "option-area" => option_area(args, &series, deterministic)?,
        other => bail!(
            "unknown plot kind {other:?} (trajectory-lines, ocean-bars, diff-distribution, option-area)"
        ),
    };
    let csv_path = args.out.join(format!("{}.csv", args.kind));
    let svg_path = args.out.join(format!("{}.svg", args.kind));
    std::fs::write(&csv_path, csv)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::write(&svg_path, svg)
        .with_context(|| format!("writing {}", svg_path.display()))?;
    println!("{} -> {}, {}", args.kind, csv_path.display(), svg_path.display());
    let mut manifest = ManifestBuilder::new(&args.out, "plot");
    manifest.add(&csv_path);
    manifest.add(&svg_path);
    manifest.write()?;
    Ok(())
}

/// Per-run score polylines over the presentation index.
fn trajectory_lines(series: &[Series], deterministic: bool) -> Result<(String, String)> {
    let mut all: Vec<(String, ScoringTrajectory)> = Vec::new();
    for s in series {
        for traj in trajectories_of(s)? {
            let label = if series.len() > 1 {
                format!("{}/{}", s.label, traj.run_id)
            } else {
                traj.run_id.clone()
            };
            all.push((label, traj));
        }
    }
    let m = all
        .first()
        .map(|(_, t)| t.len())
        .context("no trajectories to plot")?;
    if all.iter().any(|(_, t)| t.len() != m) {
        bail!("trajectory lengths differ across runs");
    }

    let mut header: Vec<&str> = vec!["presentation_index"];
    for (label, _) in &all {
        header.push(label.as_str());
    }
    let mut rows = Vec::with_capacity(m);
    for k in 0..m {
        let mut row = vec![(k + 1).to_string()];
        for (_, t) in &all {
            row.push(t.scores[k].to_string());
        }
        rows.push(row);
    }
    let csv = csv_table(&header, &rows);

    let mut chart = Chart::new((1.0, m as f64), (1.0, 5.0), deterministic);
    let mut legend = Vec::new();
    for (i, (label, t)) in all.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let points: Vec<(f64, f64)> = t
            .scores
            .iter()
            .enumerate()
            .map(|(k, &s)| ((k + 1) as f64, s as f64))
            .collect();
        chart.polyline(&points, color);
        legend.push((label.clone(), color.to_string()));
    }
    chart.legend(&legend);
    Ok((csv, chart.finish("Scoring trajectories")))
}

/// Mean OCEAN vector per series as grouped bars.
fn ocean_bars(args: &PlotArgs, series: &[Series], deterministic: bool) -> Result<(String, String)> {
    let mut vectors: Vec<(String, [f64; 5])> = Vec::new();
    for s in series {
        let inv = runs::resolve_inventory(args.inventory.as_deref(), &s.transcripts)?;
        let trajs = trajectories_of(s)?;
        let mut sums = [0.0f64; 5];
        for t in &trajs {
            let ocean = ocean_score(t, &inv)?;
            for (i, v) in ocean.as_array().iter().enumerate() {
                sums[i] += v;
            }
        }
        let n = trajs.len() as f64;
        vectors.push((s.label.clone(), sums.map(|v| v / n)));
    }

    let mut header = vec!["trait"];
    for (label, _) in &vectors {
        header.push(label.as_str());
    }
    let rows: Vec<Vec<String>> = Trait::ALL
        .iter()
        .map(|t| {
            let mut row = vec![t.code().to_string()];
            for (_, v) in &vectors {
                row.push(fmt_f64(v[t.index()]));
            }
            row
        })
        .collect();
    let csv = csv_table(&header, &rows);

    let n_series = vectors.len();
    let mut chart = Chart::new((0.0, 5.0), (0.0, 5.0), deterministic);
    let group_width = 0.8;
    let bar_width = group_width / n_series as f64;
    let mut legend = Vec::new();
    for (si, (label, values)) in vectors.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        for t in Trait::ALL {
            let x = t.index() as f64 + 0.5 - group_width / 2.0
                + bar_width * (si as f64 + 0.5);
            chart.bar(x, values[t.index()], bar_width * 0.9, color);
        }
        legend.push((label.clone(), color.to_string()));
    }
    for t in Trait::ALL {
        chart.label(t.index() as f64 + 0.5, 0.25, t.code());
    }
    chart.legend(&legend);
    Ok((csv, chart.finish("OCEAN profiles")))
}

/// Histogram of pointwise score differences between two series (first minus
/// second), realigned by item id and summed over run pairs.
fn diff_distribution(series: &[Series], deterministic: bool) -> Result<(String, String)> {
    if series.len() != 2 {
        bail!("diff-distribution needs exactly two series (dependent, free)");
    }
    let dep = trajectories_of(&series[0])?;
    let free = trajectories_of(&series[1])?;
    if dep.len() != free.len() {
        bail!(
            "series hold different run counts: {} vs {}",
            dep.len(),
            free.len()
        );
    }
    let mut buckets: BTreeMap<i8, usize> = (-4..=4).map(|b| (b, 0)).collect();
    for (d, f) in dep.iter().zip(&free) {
        let aligned = f.realign(&d.item_ids)?;
        let h = diff_histogram(d, &aligned)?;
        for (b, c) in h.buckets {
            *buckets.get_mut(&b).unwrap() += c;
        }
    }

    let rows: Vec<Vec<String>> = buckets
        .iter()
        .map(|(b, c)| vec![b.to_string(), c.to_string()])
        .collect();
    let csv = csv_table(&["bucket", "count"], &rows);

    let max = buckets.values().copied().max().unwrap_or(1).max(1) as f64;
    let mut chart = Chart::new((-4.5, 4.5), (0.0, max), deterministic);
    for (&b, &c) in &buckets {
        chart.bar(b as f64, c as f64, 0.8, SERIES_COLORS[0]);
        chart.label(b as f64, -max * 0.03, &b.to_string());
    }
    Ok((
        csv,
        chart.finish(&format!(
            "Score differences: {} - {}",
            series[0].label, series[1].label
        )),
    ))
}

/// Binned option-choice counts per canonical letter, one group of columns
/// per series (the before/after view of the adversarial analysis).
fn option_area(args: &PlotArgs, series: &[Series], deterministic: bool) -> Result<(String, String)> {
    if args.bin == 0 {
        bail!("--bin must be positive");
    }
    let letters = ["A", "B", "C", "D", "E"];
    // counts[series][bin][option]
    let mut counts: Vec<Vec<[usize; 5]>> = Vec::new();
    let mut m = 0usize;
    for s in series {
        let trajs: Vec<&Transcript> = s.transcripts.iter().collect();
        let len = trajs
            .first()
            .map(|t| t.entries.len())
            .context("empty series")?;
        m = m.max(len);
        let n_bins = len.div_ceil(args.bin);
        let mut per_bin = vec![[0usize; 5]; n_bins];
        for t in &trajs {
            for e in &t.entries {
                if let Some(sem) = e.semantic_index {
                    per_bin[(e.presentation_index - 1) / args.bin][sem] += 1;
                }
            }
        }
        counts.push(per_bin);
    }

    let n_bins = counts.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut header: Vec<String> = vec!["bin_start".into()];
    for s in series {
        for l in letters {
            header.push(format!("{}_{}", s.label, l));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let mut row = vec![(b * args.bin + 1).to_string()];
        for c in &counts {
            let bin = c.get(b).copied().unwrap_or([0; 5]);
            for v in bin {
                row.push(v.to_string());
            }
        }
        rows.push(row);
    }
    let csv = csv_table(&header_refs, &rows);

    let peak = counts
        .iter()
        .flatten()
        .flatten()
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut chart = Chart::new((1.0, m.max(2) as f64), (0.0, peak), deterministic);
    let mut legend = Vec::new();
    for (si, (s, per_bin)) in series.iter().zip(&counts).enumerate() {
        for (oi, letter) in letters.iter().enumerate() {
            let color = SERIES_COLORS[(si * 5 + oi) % SERIES_COLORS.len()];
            let points: Vec<(f64, f64)> = per_bin
                .iter()
                .enumerate()
                .map(|(b, bin)| ((b * args.bin + 1) as f64, bin[oi] as f64))
                .collect();
            if args.spline {
                chart.smooth_path(&points, color, true);
            } else {
                chart.polyline(&points, color);
            }
            if oi == 2 {
                legend.push((format!("{} ({letter})", s.label), color.to_string()));
            }
        }
    }
    chart.legend(&legend);
    Ok((csv, chart.finish("Option choices")))
}
