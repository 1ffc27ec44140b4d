//! KPI-driven feedback: threshold violations, trends and anomalies mapped to
//! configured responses, re-evaluated every tick.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::flow::kpi::ThresholdStatus;
use crate::model::{sort_directives, Directive, DirectiveKind, LayerId};
use crate::plant::{spare_kpi, standby_kpi, KPI_AVAILABILITY, KPI_DEVIATION, KPI_HUMIDITY, KPI_REPAIR_BACKLOG, KPI_TEMPERATURE};

use super::rules::{MAINTENANCE, MTTR_KPI};
use super::DecisionContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiFeedbackConfig {
    /// Deviation slope (K per tick) that triggers pre-emptive cooling.
    pub slope_crit: f64,
    /// Deviation below which anomalies and slopes are ignored as noise.
    pub deviation_floor: f64,
    pub reduce_factor: f64,
    pub cooling_cm: Option<String>,
    pub humidity_cm: Option<String>,
    pub release_temperature: f64,
    pub noncritical: Vec<String>,
    pub groups: Vec<String>,
}

impl Default for KpiFeedbackConfig {
    fn default() -> Self {
        KpiFeedbackConfig {
            slope_crit: 0.15,
            deviation_floor: 1.0,
            reduce_factor: 0.5,
            cooling_cm: None,
            humidity_cm: None,
            release_temperature: f64::NEG_INFINITY,
            noncritical: Vec::new(),
            groups: Vec::new(),
        }
    }
}

/// Sensors already throttled, so the reduction is requested once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KpiFeedbackState {
    pub throttled: BTreeSet<String>,
}

fn directive(ctx: &DecisionContext, what: &str, kind: DirectiveKind, target: &str, priority: i64) -> Directive {
    Directive::new(format!("k{:06}.{what}.{target}", ctx.time.tick()), kind, target)
        .with_priority(priority)
        .issued(LayerId::AdaptiveCoordination, ctx.time)
}

pub fn kpi_feedback_decide(ctx: &DecisionContext, cfg: &KpiFeedbackConfig, state: &mut KpiFeedbackState) -> Vec<Directive> {
    let mut out = Vec::new();
    let status = |k: &str| ctx.kpis.status(k);
    let value = |k: &str| ctx.scalar(k);

    let availability = status(KPI_AVAILABILITY);
    if availability == ThresholdStatus::Critical {
        for s in &cfg.noncritical {
            if state.throttled.insert(s.clone()) {
                out.push(directive(ctx, "reduce", DirectiveKind::ReduceSampling, s, 40).with_param("factor", cfg.reduce_factor));
            }
        }
    }
    if availability.level() >= 1.0 {
        for g in &cfg.groups {
            if value(&spare_kpi(g)).is_some_and(|v| v < 0.0) && value(&standby_kpi(g)).is_some_and(|v| v >= 1.0) {
                out.push(directive(ctx, "restore", DirectiveKind::ActivateCm, g, 85));
            }
        }
    }

    if let Some(cm) = &cfg.cooling_cm {
        let dev = value(KPI_DEVIATION).unwrap_or(0.0);
        let dev_status = status(KPI_DEVIATION);
        let slope = value(&format!("slope.{KPI_DEVIATION}")).unwrap_or(0.0);
        let anomalous = ctx
            .kpis
            .kpis
            .get(KPI_DEVIATION)
            .and_then(|k| k.anomaly.as_ref())
            .is_some_and(|a| a.value > a.mean);
        let rising = dev > cfg.deviation_floor && (slope > cfg.slope_crit || anomalous);
        if !ctx.engaged(cm) && (dev_status.level() >= 1.0 || rising) {
            out.push(directive(ctx, "cool", DirectiveKind::ActivateCm, cm, 90));
        } else if ctx.engaged(cm)
            && dev_status == ThresholdStatus::Ok
            && slope <= 0.0
            && value(KPI_TEMPERATURE).is_some_and(|t| t < cfg.release_temperature)
        {
            out.push(directive(ctx, "release", DirectiveKind::DeactivateCm, cm, 10));
        }
    }

    if let Some(cm) = &cfg.humidity_cm {
        let h = status(KPI_HUMIDITY);
        if h.level() >= 1.0 && !ctx.engaged(cm) {
            out.push(directive(ctx, "dry", DirectiveKind::ActivateCm, cm, 60));
        } else if h == ThresholdStatus::Ok && ctx.engaged(cm) {
            out.push(directive(ctx, "release", DirectiveKind::DeactivateCm, cm, 10));
        }
    }

    if status(MTTR_KPI).level() >= 1.0 && value(KPI_REPAIR_BACKLOG).is_some_and(|b| b >= 1.0) {
        out.push(directive(ctx, "notify", DirectiveKind::NotifyMaintenance, MAINTENANCE, 70));
    }
    sort_directives(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::kpi::{Direction, KpiDefinition, KpiStore};
    use crate::model::{CmState, KpiSample, SimTime};

    fn cfg() -> KpiFeedbackConfig {
        KpiFeedbackConfig {
            cooling_cm: Some("cooling_boost".into()),
            humidity_cm: Some("dehumidifier".into()),
            release_temperature: 299.65,
            noncritical: vec!["aux1".into(), "aux2".into()],
            groups: vec!["temp".into()],
            ..KpiFeedbackConfig::default()
        }
    }

    fn ctx_with(kpis: &[(&str, f64, ThresholdStatus)]) -> DecisionContext {
        let mut ctx = DecisionContext::empty(SimTime(7), 1.0);
        for (k, v, s) in kpis {
            ctx.kpis.set_latest(k, *v, *s);
        }
        ctx.cm_states.insert("cooling_boost".into(), CmState::Inactive);
        ctx.cm_states.insert("dehumidifier".into(), CmState::Inactive);
        ctx
    }

    #[test]
    fn all_on_target_is_quiet() {
        let ctx = ctx_with(&[
            (KPI_AVAILABILITY, 1.0, ThresholdStatus::Ok),
            (KPI_DEVIATION, 0.1, ThresholdStatus::Ok),
            (KPI_HUMIDITY, 0.4, ThresholdStatus::Ok),
            (MTTR_KPI, 0.0, ThresholdStatus::Ok),
        ]);
        assert!(kpi_feedback_decide(&ctx, &cfg(), &mut KpiFeedbackState::default()).is_empty());
    }

    #[test]
    fn low_availability_throttles_noncritical_once() {
        let ctx = ctx_with(&[(KPI_AVAILABILITY, 0.94, ThresholdStatus::Critical)]);
        let mut st = KpiFeedbackState::default();
        let out = kpi_feedback_decide(&ctx, &cfg(), &mut st);
        let reduced: Vec<&str> =
            out.iter().filter(|d| d.kind == DirectiveKind::ReduceSampling).map(|d| d.target.as_str()).collect();
        assert_eq!(reduced, ["aux1", "aux2"]);
        assert!(kpi_feedback_decide(&ctx, &cfg(), &mut st).iter().all(|d| d.kind != DirectiveKind::ReduceSampling));
    }

    #[test]
    fn rising_trend_cools_before_breach() {
        let def = KpiDefinition {
            direction: Direction::Above,
            warn: Some(5.0),
            critical: Some(8.0),
            ..KpiDefinition::plain(KPI_DEVIATION, 5)
        };
        let mut store = KpiStore::new(&[def], 3.0, 5);
        // 0.2 K per tick: slope 0.2 > 0.15, latest 2.0 still below warn.
        for t in 1..=10u64 {
            store.record(&KpiSample::new(KPI_DEVIATION, SimTime(t), 0.2 * t as f64)).unwrap();
        }
        let mut ctx = ctx_with(&[]);
        ctx.kpis = store.snapshot(SimTime(10));
        assert_eq!(ctx.kpis.status(KPI_DEVIATION), ThresholdStatus::Ok);
        let out = kpi_feedback_decide(&ctx, &cfg(), &mut KpiFeedbackState::default());
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].kind, out[0].target.as_str()), (DirectiveKind::ActivateCm, "cooling_boost"));
    }
}
