//! Integration & steering: risk assessment for the coordination layer,
//! directive dispatch to the executing layers, learning triggers and
//! periodic audits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acl::rules::Rule;
use crate::al::policy::{Approval, PolicyDocument};
use crate::defense::{DefenseEvent, DefenseLayer};
use crate::flow::bus::Bus;
use crate::flow::event::{Event, Payload};
use crate::flow::kpi::{KpiDefinition, KpiSnapshot};
use crate::model::{
    validate_directive, Directive, DirectiveKind, FeedbackReport, LayerId, Registry, RiskAssessment, RiskCategory,
    SimTime, TargetKind, Validity,
};
use crate::plant::{hazard_kpi, Plant, PlantEvent};
use crate::structural::{StructuralEvent, StructuralLayer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskSource {
    /// Worst per-tick failure probability over the listed sensors.
    SensorHazard { sensors: Vec<String> },
    /// Linear map of a KPI value from `[low, high]` onto `[0, 1]`.
    Kpi { kpi: String, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRule {
    pub id: String,
    pub category: RiskCategory,
    #[serde(default = "one_tick")]
    pub horizon_ticks: u64,
    pub source: RiskSource,
}

fn one_tick() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringConfig {
    pub audit_period: u64,
    /// A learning pattern (topic, target) seen within this many ticks is not novel.
    pub novelty_window: u64,
    pub risk_rules: Vec<RiskRule>,
    /// Ticks of feedback kept in the coordination context.
    pub feedback_window: u64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        SteeringConfig { audit_period: 100, novelty_window: 50, risk_rules: Vec::new(), feedback_window: 10 }
    }
}

/// One assessment per rule; pure in its inputs. Sensors that failed in
/// `recent` are added to the affected set of hazard rules that list them.
pub fn assess_risks(rules: &[RiskRule], snapshot: &KpiSnapshot, recent: &[Event], now: SimTime) -> Vec<RiskAssessment> {
    let recently_failed: BTreeSet<&str> = recent
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::Plant(PlantEvent::SensorFailed(f)) => Some(f.sensor.as_str()),
            _ => None,
        })
        .collect();
    rules
        .iter()
        .map(|r| {
            let (probability, affected) = match &r.source {
                RiskSource::SensorHazard { sensors } => {
                    let mut worst = 0.0f64;
                    let mut affected = BTreeSet::new();
                    for s in sensors {
                        let p = snapshot.latest(&hazard_kpi(s)).unwrap_or(0.0);
                        if p > worst {
                            worst = p;
                            affected.clear();
                        }
                        if p == worst && p > 0.0 {
                            affected.insert(s.clone());
                        }
                        if recently_failed.contains(s.as_str()) {
                            affected.insert(s.clone());
                        }
                    }
                    if affected.is_empty() {
                        affected.extend(sensors.iter().cloned());
                    }
                    (worst, affected)
                }
                RiskSource::Kpi { kpi, low, high } => {
                    let v = snapshot.latest(kpi).unwrap_or(*low);
                    let p = if high > low { (v - low) / (high - low) } else { 0.0 };
                    (p.clamp(0.0, 1.0), BTreeSet::from([kpi.clone()]))
                }
            };
            RiskAssessment {
                risk_id: r.id.clone(),
                category: r.category,
                probability,
                affected_components: affected,
                horizon_ticks: r.horizon_ticks,
                issued_at: now,
            }
        })
        .collect()
}

/// Something the orchestrator must apply outside the executing layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum SideEffect {
    BudgetCredit { units: f64 },
    PriorityShift { category: RiskCategory, expires_at: SimTime },
    ThresholdOverride { kpi: String, warn: Option<f64>, critical: Option<f64>, until: Option<SimTime> },
    LearningRequested { topic: String, target: String, description: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerEvent {
    Structural(StructuralEvent),
    Defense(DefenseEvent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub report: FeedbackReport,
    pub effects: Vec<SideEffect>,
    pub events: Vec<LayerEvent>,
}

impl Execution {
    fn bare(report: FeedbackReport) -> Self {
        Execution { report, effects: Vec::new(), events: Vec::new() }
    }
}

/// Mutable handles on the executing layers for one dispatch.
pub struct Layers<'a> {
    pub plant: &'a mut Plant,
    pub structural: &'a mut StructuralLayer,
    pub defense: &'a mut DefenseLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPattern {
    pub topic: String,
    pub target: String,
    pub description: String,
    pub support: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SteeringError {
    #[error("learning pattern has no supporting events")]
    EmptySupport,
    #[error("supporting event {0} is not in the trace")]
    UnknownSupport(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub at: SimTime,
    pub policy_version: u64,
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.pass)
    }
}

#[derive(Debug, Clone)]
pub struct Steering {
    pub config: SteeringConfig,
    pub registry: Registry,
    seen_patterns: BTreeMap<(String, String), SimTime>,
}

impl Steering {
    pub fn new(config: SteeringConfig, registry: Registry) -> Self {
        Steering { config, registry, seen_patterns: BTreeMap::new() }
    }

    pub fn assess(&self, snapshot: &KpiSnapshot, recent: &[Event], now: SimTime) -> Vec<RiskAssessment> {
        assess_risks(&self.config.risk_rules, snapshot, recent, now)
    }

    /// Validates, checks expiry and routes a directive to the owning layer.
    pub fn execute_directive(&mut self, d: &Directive, now: SimTime, layers: &mut Layers<'_>) -> Execution {
        if d.is_expired(now) {
            return Execution::bare(FeedbackReport::new(
                &d.id,
                crate::model::FeedbackStatus::Expired,
                0.0,
                now,
                "expired before dispatch",
            ));
        }
        if let Validity::Invalid(reason) = validate_directive(d, &self.registry) {
            return Execution::bare(FeedbackReport::rejected(&d.id, now, reason));
        }
        let info = self.registry.get(&d.target).expect("validated target").clone();
        match d.kind {
            DirectiveKind::ActivateCm => match info.kind {
                TargetKind::SensorGroup { .. } => {
                    let (report, ev) = layers.structural.activate_redundant_sensor(layers.plant, &d.target, &d.id, now);
                    Execution { report, effects: Vec::new(), events: ev.into_iter().map(LayerEvent::Structural).collect() }
                }
                _ => {
                    let (report, ev) = layers.defense.activate_countermeasure(layers.plant, &d.target, &d.parameters, &d.id, now);
                    Execution { report, effects: Vec::new(), events: ev.into_iter().map(LayerEvent::Defense).collect() }
                }
            },
            DirectiveKind::DeactivateCm => {
                let (report, ev) = layers.defense.deactivate_countermeasure(&d.target, &d.id, now);
                Execution { report, effects: Vec::new(), events: ev.into_iter().map(LayerEvent::Defense).collect() }
            }
            DirectiveKind::StrengthenBaseline => {
                let (report, ev) = layers.structural.strengthen_baseline(&d.target, &d.id, now);
                Execution { report, effects: Vec::new(), events: ev.into_iter().map(LayerEvent::Structural).collect() }
            }
            DirectiveKind::AdjustParameter => match info.kind {
                TargetKind::Kpi => {
                    let effect = SideEffect::ThresholdOverride {
                        kpi: d.target.clone(),
                        warn: d.parameters.get("warn").copied(),
                        critical: d.parameters.get("critical").copied(),
                        until: d.expires_at,
                    };
                    Execution {
                        report: FeedbackReport::completed(&d.id, 1.0, now, "threshold override"),
                        effects: vec![effect],
                        events: Vec::new(),
                    }
                }
                _ => {
                    let (report, ev) = layers.defense.adjust_parameters(&d.target, &d.parameters, &d.id, now);
                    Execution { report, effects: Vec::new(), events: ev.into_iter().map(LayerEvent::Defense).collect() }
                }
            },
            DirectiveKind::Reprioritize => {
                let category = RiskCategory::parse(&d.target).expect("category targets are category tokens");
                let expires_at = d.expires_at.expect("validated expiry");
                Execution {
                    report: FeedbackReport::completed(&d.id, 1.0, now, format!("{} prioritised until {expires_at}", d.target)),
                    effects: vec![SideEffect::PriorityShift { category, expires_at }],
                    events: Vec::new(),
                }
            }
            DirectiveKind::TriggerLearning => Execution {
                report: FeedbackReport::completed(&d.id, 1.0, now, "forwarded to learning"),
                effects: vec![SideEffect::LearningRequested {
                    topic: "directive".into(),
                    target: d.target.clone(),
                    description: format!("learning requested by {}", d.id),
                }],
                events: Vec::new(),
            },
            DirectiveKind::NotifyMaintenance => {
                let in_scope = |s: &String| match &info.kind {
                    TargetKind::Sensor => *s == d.target,
                    TargetKind::SensorGroup { members } => members.contains(s),
                    _ => true,
                };
                if let Some(floor) = d.parameters.get("seal_check").copied() {
                    // Preventive calibration: reseal worn healthy sensors.
                    let ids: Vec<String> = layers.plant.state.sensors.iter().map(|s| s.id.clone()).filter(|s| in_scope(s)).collect();
                    let serviced = ids.iter().filter(|id| layers.plant.state.service_sensor(id, floor)).count();
                    let eff = if serviced > 0 { 1.0 } else { 0.0 };
                    return Execution::bare(FeedbackReport::completed(&d.id, eff, now, format!("{serviced} sensor(s) resealed")));
                }
                let scope: BTreeSet<String> = layers.plant.state.failed_sensors().into_iter().filter(|s| in_scope(s)).collect();
                let due = now.tick() + layers.plant.config.expedited_repair_ticks;
                let saved = layers.plant.state.expedite_repairs(&scope, due);
                let report = if scope.is_empty() {
                    FeedbackReport::completed(&d.id, 0.0, now, "no failed sensors")
                } else {
                    FeedbackReport::completed(&d.id, if saved > 0 { 1.0 } else { 0.0 }, now, format!("repair of {} sensor(s) expedited by {saved} ticks", scope.len()))
                };
                Execution::bare(report)
            }
            DirectiveKind::ReduceSampling => {
                let factor = d.parameters.get("factor").copied().unwrap_or(0.5);
                let targets = BTreeSet::from([d.target.clone()]);
                let (report, credit, ev) = layers.defense.reduce_sampling(layers.plant, &targets, factor, &d.id, now);
                let effects = if credit > 0.0 { vec![SideEffect::BudgetCredit { units: credit }] } else { Vec::new() };
                Execution { report, effects, events: ev.into_iter().map(LayerEvent::Defense).collect() }
            }
        }
    }

    /// Publishes a learning trigger unless the (topic, target) pair was seen
    /// within the novelty window. Returns the trigger's seq when published.
    pub fn trigger_learning(&mut self, pattern: &LearningPattern, now: SimTime, bus: &mut Bus) -> Result<Option<u64>, SteeringError> {
        if pattern.support.is_empty() {
            return Err(SteeringError::EmptySupport);
        }
        if let Some(missing) = pattern.support.iter().find(|s| !bus.contains_seq(**s)) {
            return Err(SteeringError::UnknownSupport(*missing));
        }
        let key = (pattern.topic.clone(), pattern.target.clone());
        if let Some(last) = self.seen_patterns.get(&key) {
            if now.since(*last) < self.config.novelty_window {
                return Ok(None);
            }
        }
        self.seen_patterns.insert(key, now);
        let (seq, _) = bus.publish("learning.trigger", LayerId::IntegrationSteering, now, Payload::LearningTrigger(pattern.clone()));
        Ok(Some(seq))
    }

    /// Runs every registered check once, only on audit-period boundaries.
    pub fn run_audit(&self, at: SimTime, policy: &PolicyDocument, kpis: &[KpiDefinition], rules: &[Rule]) -> Option<AuditReport> {
        let period = self.config.audit_period;
        if period == 0 || at.tick() % period != 0 {
            return None;
        }
        let mut findings = vec![AuditFinding {
            check: "policy.approved".into(),
            pass: policy.approval != Approval::Draft,
            detail: format!("{:?}", policy.approval),
        }];
        for kpi in policy.thresholds.keys() {
            let live = kpis.iter().any(|d| &d.id == kpi);
            findings.push(AuditFinding {
                check: format!("threshold.{kpi}"),
                pass: live,
                detail: if live { "matches live KPI".into() } else { "no live KPI definition".into() },
            });
        }
        let mut seen = BTreeSet::new();
        for rule in rules.iter().chain(policy.rule_patches.iter()) {
            if !seen.insert(rule.id.clone()) {
                continue;
            }
            let target = &rule.action.target;
            let ok = self.registry.contains(target);
            findings.push(AuditFinding {
                check: format!("rule_target.{}", rule.id),
                pass: ok,
                detail: if ok { format!("{target} registered") } else { format!("{target} missing") },
            });
        }
        Some(AuditReport { at, policy_version: policy.version, findings })
    }
}
