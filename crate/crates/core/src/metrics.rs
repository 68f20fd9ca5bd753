//! Trajectory metrics: settling time, transient peak, chattering and
//! steady-state error. All are computed on recorded samples only.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{fmt_f64, Trajectory};

pub const DEFAULT_BAND_FRACTION: f64 = 0.02;

/// Earliest recorded time after which `|est - truth|` stays within
/// `band_fraction * sup|truth|`; `None` if the last sample is outside.
pub fn settling_time(
    traj: &Trajectory,
    est_col: &str,
    truth_col: &str,
    band_fraction: f64,
) -> Result<Option<f64>> {
    if !(band_fraction > 0.0 && band_fraction < 1.0) {
        return Err(Error::param("band_fraction", "must lie in (0, 1)"));
    }
    let est = traj.column(est_col)?;
    let truth = traj.column(truth_col)?;
    let band = band_fraction * truth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let first_inside = est
        .iter()
        .zip(truth)
        .rposition(|(e, t)| !((e - t).abs() <= band))
        .map_or(0, |j| j + 1);
    Ok(traj.times().get(first_inside).copied())
}

/// Largest `|value|` and the first time it is attained.
pub fn peak_abs(traj: &Trajectory, col: &str) -> Result<(f64, f64)> {
    let values = traj.column(col)?;
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = (f64::NEG_INFINITY, traj.times()[0]);
    for (v, t) in values.iter().zip(traj.times()) {
        if v.abs() > best.0 {
            best = (v.abs(), *t);
        }
    }
    Ok(best)
}

fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Excess total variation of `est` over `truth` per second of `window`.
pub fn chattering_index(
    traj: &Trajectory,
    est_col: &str,
    truth_col: &str,
    window: (f64, f64),
) -> Result<f64> {
    let est = traj.column(est_col)?;
    let truth = traj.column(truth_col)?;
    let range = traj.window(window.0, window.1)?;
    let length = window.1 - window.0;
    if !(length > 0.0) {
        return Err(Error::EmptyWindow {
            from: window.0,
            to: window.1,
        });
    }
    Ok((total_variation(&est[range.clone()]) - total_variation(&truth[range])) / length)
}

pub fn rms_error(
    traj: &Trajectory,
    est_col: &str,
    truth_col: &str,
    window: (f64, f64),
) -> Result<f64> {
    let est = traj.column(est_col)?;
    let truth = traj.column(truth_col)?;
    let range = traj.window(window.0, window.1)?;
    let n = range.len() as f64;
    let sum_sq: f64 = est[range.clone()]
        .iter()
        .zip(&truth[range])
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok((sum_sq / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_band")]
    pub band_fraction: f64,
    pub steady_window: (f64, f64),
    pub chatter_window: (f64, f64),
}

fn default_band() -> f64 {
    DEFAULT_BAND_FRACTION
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::param("metrics.band_fraction", "must lie in (0, 1)"));
        }
        for (name, (a, b)) in [
            ("metrics.steady_window", self.steady_window),
            ("metrics.chatter_window", self.chatter_window),
        ] {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::param(name, "needs from < to"));
            }
        }
        Ok(())
    }
}

/// Metrics of one estimate column against its truth column.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub estimate: String,
    pub truth: String,
    pub order: u32,
    pub settling_time: Option<f64>,
    pub peak_abs: f64,
    pub peak_time: f64,
    pub chattering_index: f64,
    pub chatter_window: (f64, f64),
    pub rms_error: f64,
    pub steady_window: (f64, f64),
    /// Spacing of the recorded samples the metrics were computed on.
    pub sample_period: f64,
}

impl MetricReport {
    pub fn compute(
        traj: &Trajectory,
        est_col: &str,
        truth_col: &str,
        order: u32,
        cfg: &MetricsConfig,
    ) -> Result<Self> {
        let (peak_abs, peak_time) = peak_abs(traj, est_col)?;
        Ok(MetricReport {
            estimate: est_col.to_string(),
            truth: truth_col.to_string(),
            order,
            settling_time: settling_time(traj, est_col, truth_col, cfg.band_fraction)?,
            peak_abs,
            peak_time,
            chattering_index: chattering_index(traj, est_col, truth_col, cfg.chatter_window)?,
            chatter_window: cfg.chatter_window,
            rms_error: rms_error(traj, est_col, truth_col, cfg.steady_window)?,
            steady_window: cfg.steady_window,
            sample_period: traj.sample_period().unwrap_or(0.0),
        })
    }

    /// Differentiator prefix of the estimate column (`sd`, `hgo`, ...).
    pub fn method(&self) -> &str {
        self.estimate.split('.').next().unwrap_or("")
    }
}

/// Pairs every estimate column ending in a derivative order `i` with
/// `true.d<i>` and computes its report.
pub fn report_all(traj: &Trajectory, cfg: &MetricsConfig) -> Result<Vec<MetricReport>> {
    let mut out = Vec::new();
    for name in traj.column_names() {
        if name.starts_with("true.") {
            continue;
        }
        let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let Ok(order) = name[name.len() - digits..].parse::<u32>() else {
            continue;
        };
        let truth = format!("true.d{order}");
        if traj.has_column(&truth) {
            out.push(MetricReport::compute(traj, name, &truth, order, cfg)?);
        }
    }
    Ok(out)
}

pub const REPORT_HEADER: &str = "method,order,estimate,truth,settling_time,peak_abs,peak_time,\
chattering_index,chatter_from,chatter_to,rms_error,steady_from,steady_to,sample_period";

/// One CSV row per report; a missing settling time is written as `none`.
pub fn write_reports<W: Write>(reports: &[MetricReport], mut out: W, comment: &str) -> Result<()> {
    for line in comment.lines() {
        if line.is_empty() {
            writeln!(out, "#")?;
        } else {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method(),
            r.order,
            r.estimate,
            r.truth,
            r.settling_time.map_or_else(|| "none".to_string(), fmt_f64),
            fmt_f64(r.peak_abs),
            fmt_f64(r.peak_time),
            fmt_f64(r.chattering_index),
            fmt_f64(r.chatter_window.0),
            fmt_f64(r.chatter_window.1),
            fmt_f64(r.rms_error),
            fmt_f64(r.steady_window.0),
            fmt_f64(r.steady_window.1),
            fmt_f64(r.sample_period),
        )?;
    }
    out.flush()?;
    Ok(())
}
