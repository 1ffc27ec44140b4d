//! Context advisor: reads free-text maintenance records and suggests
//! measures. Suggestions only become directives after validation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{validate_directive, Directive, DirectiveKind, LayerId, Registry, Validity};
use crate::plant::KPI_HUMIDITY;

use super::multi::AgentProposal;
use super::DecisionContext;

pub trait Advisor {
    fn advise(&self, ctx: &DecisionContext, corpus: &[String]) -> Result<Vec<AgentProposal>, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvisorConfig {
    /// Records mentioning both phrases needed before anything is suggested.
    pub min_co_mentions: usize,
    pub warn_step: f64,
    pub min_warn: f64,
    /// Lifetime of a suggested threshold change, in ticks.
    pub expires_in: u64,
}

impl Default for AdvisorConfig {
    fn default() -> Self {
        AdvisorConfig { min_co_mentions: 3, warn_step: 0.05, min_warn: 0.5, expires_in: 100 }
    }
}

pub const FAILURE_PHRASE: &str = "sensor failure";
pub const HUMIDITY_PHRASE: &str = "high humidity";

/// Deterministic keyword matcher: counts records that mention a sensor
/// failure together with high humidity.
#[derive(Debug, Clone, Default)]
pub struct KeywordAdvisor {
    pub config: AdvisorConfig,
    /// Standing humidity warn level the suggestion is relative to.
    pub humidity_warn: Option<f64>,
    pub humidity_cm: Option<String>,
}

impl KeywordAdvisor {
    pub fn co_mentions(corpus: &[String]) -> usize {
        corpus
            .iter()
            .map(|r| r.to_lowercase())
            .filter(|r| r.contains(FAILURE_PHRASE) && r.contains(HUMIDITY_PHRASE))
            .count()
    }
}

impl Advisor for KeywordAdvisor {
    fn advise(&self, ctx: &DecisionContext, corpus: &[String]) -> Result<Vec<AgentProposal>, String> {
        let n = Self::co_mentions(corpus);
        if n < self.config.min_co_mentions.max(1) {
            return Ok(Vec::new());
        }
        let t = ctx.time.tick();
        let why = format!("{n} records link sensor failures to high humidity");
        let mut out = Vec::new();
        if let Some(warn) = self.humidity_warn {
            let lowered = (warn - self.config.warn_step).max(self.config.min_warn);
            if lowered < warn {
                let d = Directive::new(format!("v{t:06}.threshold.{KPI_HUMIDITY}"), DirectiveKind::AdjustParameter, KPI_HUMIDITY)
                    .with_priority(50)
                    .with_param("warn", lowered)
                    .issued(LayerId::AdaptiveCoordination, ctx.time)
                    .expiring(ctx.time.plus(self.config.expires_in));
                out.push(AgentProposal {
                    agent_id: "advisor".into(),
                    proposed: d,
                    urgency: 0.5,
                    rationale: why.clone(),
                    evidence_kpis: vec![KPI_HUMIDITY.into()],
                });
            }
        }
        if let Some(cm) = &self.humidity_cm {
            if !ctx.engaged(cm) {
                let d = Directive::new(format!("v{t:06}.precool.{cm}"), DirectiveKind::ActivateCm, cm.clone())
                    .with_priority(55)
                    .issued(LayerId::AdaptiveCoordination, ctx.time);
                out.push(AgentProposal {
                    agent_id: "advisor".into(),
                    proposed: d,
                    urgency: 0.5,
                    rationale: why,
                    evidence_kpis: vec![KPI_HUMIDITY.into()],
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum SuggestionVerdict {
    Accepted,
    Rejected(String),
}

/// Accepts a suggestion only if it is a valid, safe, affordable directive
/// and at least one supporting KPI is in Warn or Critical.
pub fn validate_suggestion(p: &AgentProposal, ctx: &DecisionContext, registry: &Registry, critical: &BTreeSet<String>) -> SuggestionVerdict {
    let d = &p.proposed;
    if let Validity::Invalid(r) = validate_directive(d, registry) {
        return SuggestionVerdict::Rejected(format!("invalid: {r}"));
    }
    if d.kind == DirectiveKind::ReduceSampling && critical.contains(&d.target) {
        return SuggestionVerdict::Rejected("safety: critical sensor".into());
    }
    if registry.cost(d) > ctx.budget {
        return SuggestionVerdict::Rejected("budget".into());
    }
    if !p.evidence_kpis.iter().any(|k| ctx.kpis.status(k).level() >= 1.0) {
        return SuggestionVerdict::Rejected("implausible".into());
    }
    SuggestionVerdict::Accepted
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvisorOutcome {
    pub accepted: Vec<AgentProposal>,
    pub rejected: Vec<(AgentProposal, String)>,
    pub diagnostics: Vec<String>,
}

pub fn advisor_decide(
    advisor: &dyn Advisor,
    ctx: &DecisionContext,
    corpus: &[String],
    registry: &Registry,
    critical: &BTreeSet<String>,
) -> AdvisorOutcome {
    let mut out = AdvisorOutcome::default();
    match advisor.advise(ctx, corpus) {
        Ok(ps) => {
            for p in ps {
                match validate_suggestion(&p, ctx, registry, critical) {
                    SuggestionVerdict::Accepted => out.accepted.push(p),
                    SuggestionVerdict::Rejected(r) => out.rejected.push((p, r)),
                }
            }
        }
        Err(e) => out.diagnostics.push(format!("advisor failed: {e}")),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::kpi::ThresholdStatus;
    use crate::model::{Bounds, SimTime, TargetInfo, TargetKind};

    fn registry() -> Registry {
        let mut r = Registry::default();
        let mut kpi = TargetInfo::of(TargetKind::Kpi);
        kpi.bounds.insert("warn".into(), Bounds::UNIT);
        r.insert(KPI_HUMIDITY, kpi);
        r.insert("dehumidifier", TargetInfo { activation_cost: 1.0, ..TargetInfo::of(TargetKind::Countermeasure) });
        r.insert("aux1", TargetInfo::of(TargetKind::Sensor));
        r
    }

    fn advisor() -> KeywordAdvisor {
        KeywordAdvisor { config: AdvisorConfig::default(), humidity_warn: Some(0.85), humidity_cm: Some("dehumidifier".into()) }
    }

    fn corpus(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i} sensor failure t1 under high humidity")).collect()
    }

    fn ctx(h: ThresholdStatus, budget: f64) -> DecisionContext {
        let mut c = DecisionContext::empty(SimTime(50), budget);
        c.kpis.set_latest(KPI_HUMIDITY, 0.8, h);
        c
    }

    #[test]
    fn co_mentions_yield_threshold_and_precool() {
        let out = advisor_decide(&advisor(), &ctx(ThresholdStatus::Warn, 2.0), &corpus(3), &registry(), &BTreeSet::new());
        assert_eq!(out.accepted.len(), 2);
        assert!((out.accepted[0].proposed.parameters["warn"] - 0.8).abs() < 1e-12);
        assert_eq!(out.accepted[1].proposed.kind, DirectiveKind::ActivateCm);
    }

    #[test]
    fn empty_corpus_is_silent() {
        assert!(advisor().advise(&ctx(ThresholdStatus::Warn, 2.0), &[]).unwrap().is_empty());
    }

    #[test]
    fn validation_reasons() {
        let ps = advisor().advise(&ctx(ThresholdStatus::Ok, 2.0), &corpus(4)).unwrap();
        let reg = registry();
        assert_eq!(validate_suggestion(&ps[0], &ctx(ThresholdStatus::Ok, 2.0), &reg, &BTreeSet::new()), SuggestionVerdict::Rejected("implausible".into()));
        assert_eq!(validate_suggestion(&ps[1], &ctx(ThresholdStatus::Warn, 0.5), &reg, &BTreeSet::new()), SuggestionVerdict::Rejected("budget".into()));
        assert_eq!(validate_suggestion(&ps[1], &ctx(ThresholdStatus::Warn, 2.0), &reg, &BTreeSet::new()), SuggestionVerdict::Accepted);
        let mut throttle = ps[0].clone();
        throttle.proposed = Directive::new("x", DirectiveKind::ReduceSampling, "aux1");
        let critical = BTreeSet::from(["aux1".to_string()]);
        assert!(matches!(validate_suggestion(&throttle, &ctx(ThresholdStatus::Warn, 2.0), &reg, &critical), SuggestionVerdict::Rejected(r) if r.starts_with("safety")));
    }
}
