//! CSV output and summary statistics.

use std::path::Path;

use anyhow::{Context, Result};
use tmlmc_core::learner::TraceRecord;

pub const TRAIN_HEADER: [&str; 5] = ["run_id", "iteration", "cum_samples", "q_gap_inf", "greedy_robust_value"];
pub const SUMMARY_HEADER: [&str; 4] = ["iteration", "mean", "p5", "p95"];
pub const BIAS_HEADER: [&str; 5] = ["n_max", "bias_hat", "bias_se", "var_hat", "mean_samples"];
pub const COMPARE_HEADER: [&str; 6] = ["series", "n_max", "run_id", "iteration", "cum_samples", "greedy_robust_value"];

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p * n)`, counting from 1.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_train_csv(path: &Path, runs: &[Vec<TraceRecord>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAIN_HEADER)?;
    for (run_id, records) in runs.iter().enumerate() {
        for r in records {
            w.write_record([
                run_id.to_string(),
                r.iteration.to_string(),
                r.cum_samples.to_string(),
                opt(r.q_gap_inf),
                opt(r.greedy_robust_value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
}

/// Per-iteration mean and 5th/95th percentiles of the greedy robust value
/// across runs, for iterations where every run was evaluated.
pub fn summarize(runs: &[Vec<TraceRecord>]) -> Vec<SummaryRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (i, record) in first.iter().enumerate() {
        let values: Option<Vec<f64>> = runs
            .iter()
            .map(|run| run.get(i).filter(|r| r.iteration == record.iteration).and_then(|r| r.greedy_robust_value))
            .collect();
        if let Some(mut values) = values {
            values.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                iteration: record.iteration,
                mean: mean(&values),
                p5: percentile(&values, 0.05),
                p95: percentile(&values, 0.95),
            });
        }
    }
    rows
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([r.iteration.to_string(), r.mean.to_string(), r.p5.to_string(), r.p95.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub n_max: u32,
    pub bias_hat: f64,
    pub bias_se: f64,
    pub var_hat: f64,
    pub mean_samples: f64,
}

pub fn write_bias_csv(path: &Path, rows: &[BiasRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(BIAS_HEADER)?;
    for r in rows {
        w.write_record([
            r.n_max.to_string(),
            r.bias_hat.to_string(),
            r.bias_se.to_string(),
            r.var_hat.to_string(),
            r.mean_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One learner run tagged with its series name and threshold.
pub struct SeriesRun<'a> {
    pub series: &'a str,
    pub n_max: u32,
    pub run_id: usize,
    pub records: &'a [TraceRecord],
}

pub fn write_compare_csv(path: &Path, runs: &[SeriesRun<'_>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COMPARE_HEADER)?;
    for run in runs {
        for r in run.records {
            w.write_record([
                run.series.to_string(),
                run.n_max.to_string(),
                run.run_id.to_string(),
                r.iteration.to_string(),
                r.cum_samples.to_string(),
                opt(r.greedy_robust_value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
