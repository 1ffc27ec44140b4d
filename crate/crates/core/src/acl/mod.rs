//! Adaptive coordination: per-tick decisions over KPIs, risks, countermeasure
//! states and feedback, with pluggable strategies, conflict resolution and
//! budgeting.

pub mod advisor;
pub mod agent;
pub mod feedback;
pub mod multi;
pub mod rules;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::flow::kpi::KpiSnapshot;
use crate::model::{validate_directive, CmState, Directive, FeedbackReport, Registry, RiskAssessment, RiskCategory, SimTime, Validity};

pub use advisor::{advisor_decide, validate_suggestion, Advisor, AdvisorConfig, AdvisorOutcome, KeywordAdvisor, SuggestionVerdict};
pub use agent::{learn, learning_agent_decide, AgentAction, AgentChoice, AgentConfig, AgentPolicyTable, AgentTargets, RewardWeights, StateBins, Transition};
pub use feedback::{kpi_feedback_decide, KpiFeedbackConfig, KpiFeedbackState};
pub use multi::{arbitrate, multi_agent_decide, Agent, AgentProposal, CoolingAgent, MaintenanceAgent, MultiOutcome, SensorAgent};
pub use rules::{default_ruleset, load_ruleset, rule_engine_decide, Comparison, Condition, Op, Rule, RuleOutcome, RulesetError, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityShift {
    pub category: RiskCategory,
    pub expires_at: SimTime,
}

impl PriorityShift {
    /// Active strictly before `expires_at`.
    pub fn is_active(&self, now: SimTime) -> bool {
        now < self.expires_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionContext {
    pub time: SimTime,
    pub kpis: KpiSnapshot,
    pub risks: Vec<RiskAssessment>,
    pub cm_states: BTreeMap<String, CmState>,
    pub recent_feedback: Vec<FeedbackReport>,
    pub budget: f64,
    pub active_priority_shift: Option<PriorityShift>,
}

impl DecisionContext {
    pub fn empty(time: SimTime, budget: f64) -> Self {
        DecisionContext {
            time,
            kpis: KpiSnapshot { at: time, kpis: BTreeMap::new() },
            risks: Vec::new(),
            cm_states: BTreeMap::new(),
            recent_feedback: Vec::new(),
            budget,
            active_priority_shift: None,
        }
    }

    /// Resolves a scalar name used by rule conditions:
    /// `risk.<id>`, `budget`, `status.<kpi>` (threshold level), `avg.<kpi>`,
    /// `slope.<kpi>`, `cm.<id>.active`, otherwise the latest KPI value.
    pub fn scalar(&self, name: &str) -> Option<f64> {
        if name == "budget" {
            return Some(self.budget);
        }
        if let Some(id) = name.strip_prefix("risk.") {
            return self.risks.iter().filter(|r| r.risk_id == id).map(|r| r.probability).reduce(f64::max);
        }
        if let Some(kpi) = name.strip_prefix("status.") {
            let st = self.kpis.kpis.get(kpi)?.status;
            let level = st.level();
            return (level >= 0.0).then_some(level);
        }
        if let Some(kpi) = name.strip_prefix("avg.") {
            return self.kpis.kpis.get(kpi)?.moving_average;
        }
        if let Some(kpi) = name.strip_prefix("slope.") {
            return self.kpis.kpis.get(kpi)?.slope;
        }
        if let Some(rest) = name.strip_prefix("cm.") {
            if let Some(id) = rest.strip_suffix(".active") {
                return self.cm_states.get(id).map(|s| if *s != CmState::Inactive { 1.0 } else { 0.0 });
            }
        }
        self.kpis.latest(name)
    }

    /// Active, degraded or on its way up.
    pub fn engaged(&self, cm: &str) -> bool {
        self.cm_states.get(cm).is_some_and(|s| *s != CmState::Inactive)
    }

    pub fn max_risk(&self) -> f64 {
        self.risks.iter().map(|r| r.probability).fold(0.0, f64::max)
    }
}

/// Strategy names as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AclVariant {
    Off,
    Rules,
    Kpi,
    Agent,
    Advisor,
    MultiAgent,
}

impl AclVariant {
    pub const ALL: [AclVariant; 6] =
        [AclVariant::Off, AclVariant::Rules, AclVariant::Kpi, AclVariant::Agent, AclVariant::Advisor, AclVariant::MultiAgent];

    pub fn parse(s: &str) -> Option<AclVariant> {
        AclVariant::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            AclVariant::Off => "off",
            AclVariant::Rules => "rules",
            AclVariant::Kpi => "kpi",
            AclVariant::Agent => "agent",
            AclVariant::Advisor => "advisor",
            AclVariant::MultiAgent => "multi-agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub accepted: Vec<Directive>,
    pub rejected: Vec<(Directive, String)>,
    pub spent: f64,
}

/// Base priority plus `bonus` for directives in the shifted category while
/// the shift is active.
pub fn effective_priority(d: &Directive, registry: &Registry, shift: Option<&PriorityShift>, bonus: i64, now: SimTime) -> i64 {
    match shift {
        Some(s) if s.is_active(now) && registry.category(d) == Some(s.category) => d.priority.saturating_add(bonus),
        _ => d.priority,
    }
}

/// Orders by effective priority (desc) then id, drops invalid directives and
/// target collisions, then accepts greedily while the running cost stays
/// within `budget`.
pub fn resolve_conflicts(
    proposals: &[Directive],
    budget: f64,
    registry: &Registry,
    shift: Option<&PriorityShift>,
    bonus: i64,
    now: SimTime,
) -> Resolution {
    let mut order: Vec<(i64, &Directive)> =
        proposals.iter().map(|d| (effective_priority(d, registry, shift, bonus, now), d)).collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut targets = BTreeSet::new();
    let mut spent = 0.0;
    for (_, d) in order {
        if let Validity::Invalid(reason) = validate_directive(d, registry) {
            rejected.push((d.clone(), format!("invalid: {reason}")));
            continue;
        }
        if targets.contains(&d.target) {
            rejected.push((d.clone(), "target conflict".to_string()));
            continue;
        }
        let cost = registry.cost(d);
        if spent + cost > budget {
            rejected.push((d.clone(), "budget".to_string()));
            continue;
        }
        spent += cost;
        targets.insert(d.target.clone());
        accepted.push(d.clone());
    }
    Resolution { accepted, rejected, spent }
}

/// Compares two directives the way [`resolve_conflicts`] ranks them.
pub fn rank(a: &Directive, b: &Directive, registry: &Registry, shift: Option<&PriorityShift>, bonus: i64, now: SimTime) -> Ordering {
    let pa = effective_priority(a, registry, shift, bonus, now);
    let pb = effective_priority(b, registry, shift, bonus, now);
    pb.cmp(&pa).then_with(|| a.id.cmp(&b.id))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscalationConfig {
    /// Occurrences within `window` that trigger an escalation.
    pub threshold: usize,
    pub window: u64,
    pub cooldown: u64,
}

impl Default for EscalationConfig {
    fn default() -> Self {
        EscalationConfig { threshold: 3, window: 50, cooldown: 100 }
    }
}

/// Counts repeated patterns (e.g. failed feedback on one countermeasure)
/// and decides when to hand them to the learning layer.
#[derive(Debug, Clone, Default)]
pub struct Escalator {
    pub config: EscalationConfig,
    seen: BTreeMap<String, Vec<(SimTime, u64)>>,
    last: BTreeMap<String, SimTime>,
}

impl Escalator {
    pub fn new(config: EscalationConfig) -> Self {
        Escalator { config, seen: BTreeMap::new(), last: BTreeMap::new() }
    }

    /// Records one occurrence (with its event seq). Returns the supporting
    /// seqs when the pattern should escalate now.
    pub fn observe(&mut self, pattern: &str, at: SimTime, seq: u64) -> Option<Vec<u64>> {
        let w = self.config.window;
        let hits = self.seen.entry(pattern.to_string()).or_default();
        hits.push((at, seq));
        hits.retain(|(t, _)| at.since(*t) < w);
        if hits.len() < self.config.threshold.max(1) {
            return None;
        }
        if let Some(last) = self.last.get(pattern) {
            if at.since(*last) < self.config.cooldown {
                return None;
            }
        }
        self.last.insert(pattern.to_string(), at);
        let support = hits.iter().map(|(_, s)| *s).collect();
        hits.clear();
        Some(support)
    }
}
