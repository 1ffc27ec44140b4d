//! Recurring-pattern detection over failure histories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::SimTime;

use super::policy::{AdaptationProposal, Evidence, PolicyDelta, ProposalSource, ProposalStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Cadence of the loop in ticks.
    pub period: u64,
    pub candidate_periods: Vec<u64>,
    pub rho_crit: f64,
    /// Failure counts are summed into bins of this many ticks.
    pub bin_ticks: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { period: 250, candidate_periods: vec![50, 100, 200, 250], rho_crit: 0.5, bin_ticks: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Slope,
    Period,
    Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub subject: String,
    pub window: (SimTime, SimTime),
    pub kind: StatisticKind,
    /// Detected period in ticks for `Period` reports.
    pub period: Option<u64>,
    pub value: f64,
    pub significant: bool,
}

/// Lag-`k` sample autocorrelation; `None` for zero variance or `k >= n`.
pub fn autocorrelation(x: &[f64], k: usize) -> Option<f64> {
    let n = x.len();
    if k >= n {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum();
    Some(num / denom)
}

/// Failure ticks (with their event seqs) per failure class.
pub type FailureHistory = BTreeMap<String, Vec<(SimTime, u64)>>;

/// For each failure class with any failures in `[start, end)`, reports the
/// candidate period with the highest autocorrelation among those covered at
/// least twice. A significant peak proposes aligning the maintenance
/// interval to it.
pub fn learning_loop(
    history: &FailureHistory,
    start: SimTime,
    end: SimTime,
    cfg: &LoopConfig,
    current_interval: Option<u64>,
) -> (Vec<TrendReport>, Vec<AdaptationProposal>) {
    let mut reports = Vec::new();
    let mut proposals = Vec::new();
    let bin = cfg.bin_ticks.max(1);
    let span = end.since(start);
    let nbins = (span / bin) as usize;
    for (class, failures) in history {
        let inside: Vec<&(SimTime, u64)> = failures.iter().filter(|(t, _)| *t >= start && *t < end).collect();
        if inside.is_empty() || nbins == 0 {
            continue;
        }
        let mut counts = vec![0.0; nbins];
        for (t, _) in &inside {
            let i = (t.since(start) / bin) as usize;
            if i < nbins {
                counts[i] += 1.0;
            }
        }
        let mut best: Option<(u64, f64)> = None;
        for &p in &cfg.candidate_periods {
            if p == 0 || p % bin != 0 || span < 2 * p {
                continue;
            }
            if let Some(r) = autocorrelation(&counts, (p / bin) as usize) {
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((p, r));
                }
            }
        }
        let Some((period, rho)) = best else { continue };
        let significant = rho >= cfg.rho_crit;
        reports.push(TrendReport {
            subject: class.clone(),
            window: (start, end),
            kind: StatisticKind::Period,
            period: Some(period),
            value: rho,
            significant,
        });
        if significant && current_interval != Some(period) {
            proposals.push(AdaptationProposal {
                id: format!("loop{:06}.{class}", end.tick()),
                source: ProposalSource::LearningLoop,
                change: PolicyDelta::MaintenanceInterval { ticks: period },
                evidence: Evidence { events: inside.iter().map(|(_, s)| *s).collect(), statistic: Some(("autocorrelation".into(), rho)) },
                rationale: format!("{class} failures recur every {period} ticks (r = {rho:.3})"),
                status: ProposalStatus::Pending,
            });
        }
    }
    (reports, proposals)
}
