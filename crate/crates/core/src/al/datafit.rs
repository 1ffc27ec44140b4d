//! Data-driven threshold fitting: how strongly failures follow humidity.

use serde::{Deserialize, Serialize};

use crate::plant::KPI_HUMIDITY;

use super::policy::{AdaptationProposal, Evidence, PolicyDelta, ProposalSource, ProposalStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Failures needed before anything is fitted.
    pub n_min: usize,
    pub r_crit: f64,
    /// Critical t value for the correlation significance test.
    pub t_crit: f64,
    pub quantile: f64,
    /// Observation block length in ticks.
    pub block_ticks: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { n_min: 10, r_crit: 0.5, t_crit: 2.0, quantile: 0.25, block_ticks: 20 }
    }
}

/// One observation block: mean humidity and whether any failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub humidity: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub r: f64,
    pub t: f64,
    pub n: usize,
}

/// Point-biserial correlation between a continuous variable and a binary
/// indicator, using the population standard deviation.
pub fn point_biserial(obs: &[Observation]) -> Option<f64> {
    let n = obs.len() as f64;
    let (ones, zeros): (Vec<&Observation>, Vec<&Observation>) = obs.iter().partition(|o| o.failed);
    if ones.is_empty() || zeros.is_empty() {
        return None;
    }
    let mean = |xs: &[&Observation]| xs.iter().map(|o| o.humidity).sum::<f64>() / xs.len() as f64;
    let all = obs.iter().map(|o| o.humidity).sum::<f64>() / n;
    let sd = (obs.iter().map(|o| (o.humidity - all).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return None;
    }
    let p = ones.len() as f64 / n;
    Some((mean(&ones) - mean(&zeros)) / sd * (p * (1.0 - p)).sqrt())
}

/// Type-7 (linear interpolation) sample quantile.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Proposes lowering the humidity warn level to the configured quantile of
/// failure-time humidity when failures correlate strongly and significantly
/// with humidity.
pub fn fit_adaptation_model(
    obs: &[Observation],
    failure_humidity: &[f64],
    evidence: &[u64],
    current_warn: Option<f64>,
    cfg: &FitConfig,
    id: &str,
) -> (Option<FitStats>, Vec<AdaptationProposal>) {
    if failure_humidity.len() < cfg.n_min || obs.len() < 3 {
        return (None, Vec::new());
    }
    let Some(r) = point_biserial(obs) else { return (None, Vec::new()) };
    let n = obs.len();
    let t = if r.abs() >= 1.0 { f64::INFINITY } else { r * ((n - 2) as f64 / (1.0 - r * r)).sqrt() };
    let stats = FitStats { r, t, n };
    if r < cfg.r_crit || t < cfg.t_crit {
        return (Some(stats), Vec::new());
    }
    let Some(level) = quantile(failure_humidity, cfg.quantile) else { return (Some(stats), Vec::new()) };
    if current_warn.is_some_and(|w| level >= w) {
        return (Some(stats), Vec::new());
    }
    let p = AdaptationProposal {
        id: id.into(),
        source: ProposalSource::DataDriven,
        change: PolicyDelta::Threshold { kpi: KPI_HUMIDITY.into(), warn: Some(level), critical: None },
        evidence: Evidence { events: evidence.to_vec(), statistic: Some(("point_biserial_r".into(), r)) },
        rationale: format!("failures correlate with humidity (r = {r:.3}, t = {t:.2}); warn at the {} quantile {level:.3}", cfg.quantile),
        status: ProposalStatus::Pending,
    };
    (Some(stats), vec![p])
}
