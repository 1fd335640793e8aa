//! Trace and summary CSV files.
//!
//! Trace columns: `iter,t,reward_win,reward_lose,s_gap,branch,grad_norm,avg_reward`.
//! Floats use Rust's shortest round-trip formatting; absent values are
//! empty fields. `branch` is `pull_only`, `push_pull`, `skipped`, or empty
//! (SDS iterations).

use std::fmt::Write as _;
use std::path::Path;

use pairdistill_core::engine::{Branch, IterationTrace};

use crate::error::{format_err, io_err, Result};

pub const TRACE_HEADER: &str = "iter,t,reward_win,reward_lose,s_gap,branch,grad_norm,avg_reward";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_trace(traces: &[IterationTrace]) -> String {
    let mut out = String::with_capacity(64 * (traces.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for tr in traces {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            tr.iteration,
            tr.t,
            opt(tr.reward_win),
            opt(tr.reward_lose),
            opt(tr.s_gap),
            tr.branch.map(Branch::as_str).unwrap_or(""),
            tr.grad_norm,
            opt(tr.metric_avg_reward),
        );
    }
    out
}

pub fn write_trace(path: &Path, traces: &[IterationTrace]) -> Result<()> {
    std::fs::write(path, format_trace(traces)).map_err(io_err(path))
}

fn field<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

fn opt_field<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
    if s.is_empty() {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<IterationTrace>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err("missing or wrong trace header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || format!("line {}: malformed trace row '{line}'", i + 2);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let branch = if f[5].is_empty() { Some(None) } else { f[5].parse::<Branch>().ok().map(Some) };
            Ok(IterationTrace {
                iteration: field(f[0]).ok_or_else(bad)?,
                t: field(f[1]).ok_or_else(bad)?,
                reward_win: opt_field(f[2]).ok_or_else(bad)?,
                reward_lose: opt_field(f[3]).ok_or_else(bad)?,
                s_gap: opt_field(f[4]).ok_or_else(bad)?,
                branch: branch.ok_or_else(bad)?,
                grad_norm: field(f[6]).ok_or_else(bad)?,
                metric_avg_reward: opt_field(f[7]).ok_or_else(bad)?,
            })
        })
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationTrace>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_trace(&text).map_err(|m| format_err(path, m))
}

/// One row of a summary table.
///
/// `seconds` is reported on the console but deliberately left out of the
/// CSV so that every written file depends only on (config, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mode: String,
    pub tau: f64,
    pub pair_strategy: String,
    pub steps: usize,
    pub final_avg_reward: Option<f64>,
    /// Mean distance of the training-view renders to the proximity target.
    pub distance_to_target: Option<f64>,
    pub pull_only: usize,
    pub push_pull: usize,
    pub skipped: usize,
    pub mean_s_gap: Option<f64>,
    /// Sweep only: push_pull count when the reference run's score gaps are
    /// replayed under this row's threshold.
    pub replay_push_pull: Option<usize>,
    pub image_min: f64,
    pub image_max: f64,
    pub seconds: f64,
}

pub const SUMMARY_HEADER: &str = "name,mode,tau,pair_strategy,steps,final_avg_reward,distance_to_target,\
pull_only,push_pull,skipped,mean_s_gap,replay_push_pull,image_min,image_max";

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.mode,
            r.tau,
            r.pair_strategy,
            r.steps,
            opt(r.final_avg_reward),
            opt(r.distance_to_target),
            r.pull_only,
            r.push_pull,
            r.skipped,
            opt(r.mean_s_gap),
            opt(r.replay_push_pull),
            r.image_min,
            r.image_max,
        );
    }
    out
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    std::fs::write(path, format_summary(rows)).map_err(io_err(path))
}
