//! Map-quality and mission metrics, and per-framework summaries.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gp::GaussianPrediction;
use crate::grid::{Cell, GridMap};

/// Floor applied to predictive variances before scoring.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Mean negative log predictive density of `truth` under independent
/// Gaussian marginals.
pub fn nlpd(truth: &[f64], prediction: &GaussianPrediction) -> f64 {
    assert_eq!(truth.len(), prediction.len(), "prediction must cover the map");
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let total: f64 = truth
        .iter()
        .zip(&prediction.mean)
        .zip(&prediction.variance)
        .map(|((f, m), v)| {
            let v = v.max(VARIANCE_FLOOR);
            (f - m).powi(2) / (2.0 * v) + 0.5 * v.ln() + half_log_2pi
        })
        .sum();
    total / truth.len() as f64
}

pub fn mse(truth: &[f64], mean: &[f64]) -> f64 {
    assert_eq!(truth.len(), mean.len(), "maps differ in size");
    truth.iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64
}

/// `Σ (f(x) + a)` over the entered cells, revisits included.
pub fn accumulated_cost(entered: &[Cell], truth: &GridMap, a: f64) -> f64 {
    entered.iter().map(|&c| truth.get(c) + a).sum()
}

/// One metrics row per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub sim_id: usize,
    pub framework: String,
    pub t_final: usize,
    pub path_cost: f64,
    pub comm_cost: usize,
    pub nlpd: f64,
    pub mse: f64,
}

pub const METRICS_HEADER: &str = "sim_id,framework,t_final,path_cost,comm_cost,nlpd,mse";
pub const SUMMARY_HEADER: &str = "framework,mu_t,sd_t,mu_C,sd_C,mu_B,sd_B,r_cost_pct,r_com_pct";

pub const BASELINE_COST: &str = "U";
pub const BASELINE_COMM: &str = "FI";

impl EpisodeMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sim_id, self.framework, self.t_final, self.path_cost, self.comm_cost, self.nlpd, self.mse
        )
    }
}

fn mean_ratio(
    rows: &[EpisodeMetrics],
    framework: &str,
    reference: &str,
    value: impl Fn(&EpisodeMetrics) -> f64,
) -> Result<f64> {
    let mine: Vec<&EpisodeMetrics> = rows.iter().filter(|r| r.framework == framework).collect();
    if mine.is_empty() {
        return Err(Error::MissingReference(framework.to_string()));
    }
    let mut acc = 0.0;
    for r in &mine {
        let base = rows
            .iter()
            .find(|b| b.framework == reference && b.sim_id == r.sim_id)
            .ok_or_else(|| Error::MissingReference(format!("{reference} (simulation {})", r.sim_id)))?;
        acc += value(r) / value(base);
    }
    Ok(100.0 * acc / mine.len() as f64)
}

/// Mean path-cost ratio to the no-communication baseline, in percent.
pub fn cost_ratio(rows: &[EpisodeMetrics], framework: &str) -> Result<f64> {
    mean_ratio(rows, framework, BASELINE_COST, |r| r.path_cost)
}

/// Mean communication ratio to full relay, in percent.
pub fn comm_ratio(rows: &[EpisodeMetrics], framework: &str) -> Result<f64> {
    mean_ratio(rows, framework, BASELINE_COMM, |r| r.comm_cost as f64)
}

/// `(r_cost, r_com)` in percent.
pub fn ratios(rows: &[EpisodeMetrics], framework: &str) -> Result<(f64, f64)> {
    Ok((cost_ratio(rows, framework)?, comm_ratio(rows, framework)?))
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkSummary {
    pub framework: String,
    pub episodes: usize,
    pub mu_t: f64,
    pub sd_t: f64,
    pub mu_c: f64,
    pub sd_c: f64,
    pub mu_b: f64,
    pub sd_b: f64,
    pub r_cost_pct: Option<f64>,
    pub r_com_pct: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

impl FrameworkSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.framework,
            self.mu_t,
            self.sd_t,
            self.mu_c,
            self.sd_c,
            self.mu_b,
            self.sd_b,
            fmt_opt(self.r_cost_pct),
            fmt_opt(self.r_com_pct)
        )
    }
}

/// Per-framework statistics in order of first appearance. Ratios are `None`
/// when a reference episode is missing.
pub fn summarize(rows: &[EpisodeMetrics]) -> Vec<FrameworkSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.framework.as_str()) {
            names.push(&r.framework);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&EpisodeMetrics> = rows.iter().filter(|r| r.framework == name).collect();
            let col = |f: fn(&EpisodeMetrics) -> f64| mean_std(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mu_t, sd_t) = col(|r| r.t_final as f64);
            let (mu_c, sd_c) = col(|r| r.path_cost);
            let (mu_b, sd_b) = col(|r| r.comm_cost as f64);
            FrameworkSummary {
                framework: name.to_string(),
                episodes: mine.len(),
                mu_t,
                sd_t,
                mu_c,
                sd_c,
                mu_b,
                sd_b,
                r_cost_pct: cost_ratio(rows, name).ok(),
                r_com_pct: comm_ratio(rows, name).ok(),
            }
        })
        .collect()
}

/// Metrics CSV text: header plus one line per row, LF-terminated.
pub fn metrics_csv(rows: &[EpisodeMetrics]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn summary_csv(summary: &[FrameworkSummary]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in summary {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}
