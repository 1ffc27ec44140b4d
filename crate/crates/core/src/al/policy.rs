//! Versioned policy documents, adaptation proposals and governed updates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acl::rules::{Rule, MTTR_KPI};
use crate::flow::kpi::KpiStore;
use crate::model::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approval {
    Draft,
    Approved,
    AutoApproved,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaintenancePolicy {
    /// Scheduled service every this many ticks.
    pub interval_ticks: Option<u64>,
    pub checklist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryPolicy {
    pub target_minutes: f64,
    pub scrutiny: bool,
    /// Maintenance is notified once recovery takes longer than this.
    pub notify_after_minutes: f64,
}

impl Default for RecoveryPolicy {
    fn default() -> Self {
        RecoveryPolicy { target_minutes: 10.0, scrutiny: false, notify_after_minutes: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum PolicyDelta {
    Threshold { kpi: String, warn: Option<f64>, critical: Option<f64> },
    RulePatch { rule: Rule },
    MaintenanceChecklist { add: String },
    MaintenanceInterval { ticks: u64 },
    Recovery { scrutiny: bool, notify_after_minutes: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangelogEntry {
    pub version: u64,
    pub proposal_id: String,
    pub rationale: String,
    pub approval: Approval,
    pub change: PolicyDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyDocument {
    pub version: u64,
    pub thresholds: BTreeMap<String, ThresholdSet>,
    pub rule_patches: Vec<Rule>,
    pub maintenance: MaintenancePolicy,
    pub recovery: RecoveryPolicy,
    pub approval: Approval,
    pub changelog: Vec<ChangelogEntry>,
}

impl Default for PolicyDocument {
    fn default() -> Self {
        PolicyDocument {
            version: 0,
            thresholds: BTreeMap::new(),
            rule_patches: Vec::new(),
            maintenance: MaintenancePolicy::default(),
            recovery: RecoveryPolicy::default(),
            approval: Approval::Approved,
            changelog: Vec::new(),
        }
    }
}

impl PolicyDocument {
    /// Applies a delta to the content only; no version or changelog change.
    fn with_delta(&self, delta: &PolicyDelta) -> PolicyDocument {
        let mut d = self.clone();
        match delta {
            PolicyDelta::Threshold { kpi, warn, critical } => {
                let t = d.thresholds.entry(kpi.clone()).or_default();
                if warn.is_some() {
                    t.warn = *warn;
                }
                if critical.is_some() {
                    t.critical = *critical;
                }
            }
            PolicyDelta::RulePatch { rule } => match d.rule_patches.iter_mut().find(|r| r.id == rule.id) {
                Some(slot) => *slot = rule.clone(),
                None => d.rule_patches.push(rule.clone()),
            },
            PolicyDelta::MaintenanceChecklist { add } => {
                if !d.maintenance.checklist.contains(add) {
                    d.maintenance.checklist.push(add.clone());
                }
            }
            PolicyDelta::MaintenanceInterval { ticks } => d.maintenance.interval_ticks = Some(*ticks),
            PolicyDelta::Recovery { scrutiny, notify_after_minutes } => {
                d.recovery.scrutiny = *scrutiny;
                d.recovery.notify_after_minutes = *notify_after_minutes;
            }
        }
        d
    }

    fn same_content(&self, other: &PolicyDocument) -> bool {
        self.thresholds == other.thresholds
            && self.rule_patches == other.rule_patches
            && self.maintenance == other.maintenance
            && self.recovery == other.recovery
    }
}

/// Rebuilds a document by folding `log` over `base`.
pub fn replay_changelog(base: &PolicyDocument, log: &[ChangelogEntry]) -> PolicyDocument {
    let mut d = base.clone();
    for e in log {
        d = d.with_delta(&e.change);
        d.version = e.version;
        d.approval = e.approval;
        d.changelog.push(e.clone());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalSource {
    PostIncident,
    LearningLoop,
    DataDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Approved,
    Rejected,
    Applied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub events: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationProposal {
    pub id: String,
    pub source: ProposalSource,
    pub change: PolicyDelta,
    pub evidence: Evidence,
    pub rationale: String,
    pub status: ProposalStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ApprovalMode {
    /// Only proposals listed in the approvals file (or already Approved) apply.
    Manual { approvals: BTreeSet<String> },
    /// Safety-bounded deltas apply without a listed approval.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyGuards {
    /// Allowed range of each KPI's thresholds.
    pub bounds: BTreeMap<String, Bounds>,
    /// Largest change of one threshold in one update.
    pub max_delta: f64,
}

impl Default for PolicyGuards {
    fn default() -> Self {
        PolicyGuards { bounds: BTreeMap::new(), max_delta: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("proposal {0} is awaiting approval")]
    AwaitingApproval(String),
    #[error("proposal {0} is {1:?} and cannot be applied")]
    NotApplicable(String, ProposalStatus),
    #[error("proposal {0} has no evidence")]
    NoEvidence(String),
    #[error("unsafe change: {0}")]
    Unsafe(String),
    #[error("proposal {0} does not change the policy")]
    NoChange(String),
}

/// Hard-bound and step-size checks on a delta against the current document.
pub fn check_delta(doc: &PolicyDocument, delta: &PolicyDelta, guards: &PolicyGuards) -> Result<(), String> {
    match delta {
        PolicyDelta::Threshold { kpi, warn, critical } => {
            let cur = doc.thresholds.get(kpi).copied().unwrap_or_default();
            for (name, new, old) in [("warn", warn, cur.warn), ("critical", critical, cur.critical)] {
                let Some(v) = new else { continue };
                if !v.is_finite() {
                    return Err(format!("{kpi}.{name} is not finite"));
                }
                if let Some(b) = guards.bounds.get(kpi) {
                    if !b.contains(*v) {
                        return Err(format!("{kpi}.{name}={v} outside [{}, {}]", b.min, b.max));
                    }
                }
                if let Some(o) = old {
                    if (v - o).abs() > guards.max_delta + 1e-12 {
                        return Err(format!("{kpi}.{name} moves {} > {}", (v - o).abs(), guards.max_delta));
                    }
                }
            }
            Ok(())
        }
        PolicyDelta::MaintenanceInterval { ticks } if *ticks == 0 => Err("maintenance interval must be positive".into()),
        PolicyDelta::Recovery { notify_after_minutes, .. } if !(*notify_after_minutes > 0.0) => {
            Err("notification delay must be positive".into())
        }
        _ => Ok(()),
    }
}

/// Applies an approved (or, in auto mode, safe) proposal: version + 1 and a
/// changelog entry. The proposal comes back marked Applied.
pub fn apply_policy_update(
    doc: &PolicyDocument,
    proposal: &AdaptationProposal,
    mode: &ApprovalMode,
    guards: &PolicyGuards,
) -> Result<(PolicyDocument, AdaptationProposal), PolicyError> {
    let id = proposal.id.clone();
    let approval = match (proposal.status, mode) {
        (ProposalStatus::Rejected | ProposalStatus::Applied, _) => return Err(PolicyError::NotApplicable(id, proposal.status)),
        (ProposalStatus::Approved, ApprovalMode::Manual { .. }) => Approval::Approved,
        (ProposalStatus::Pending, ApprovalMode::Manual { approvals }) => {
            if !approvals.contains(&id) {
                return Err(PolicyError::AwaitingApproval(id));
            }
            Approval::Approved
        }
        (_, ApprovalMode::Auto) => Approval::AutoApproved,
    };
    if proposal.evidence.events.is_empty() {
        return Err(PolicyError::NoEvidence(id));
    }
    check_delta(doc, &proposal.change, guards).map_err(PolicyError::Unsafe)?;
    let mut next = doc.with_delta(&proposal.change);
    if next.same_content(doc) {
        return Err(PolicyError::NoChange(id));
    }
    next.version = doc.version + 1;
    next.approval = approval;
    next.changelog.push(ChangelogEntry {
        version: next.version,
        proposal_id: id,
        rationale: proposal.rationale.clone(),
        approval,
        change: proposal.change.clone(),
    });
    let mut applied = proposal.clone();
    applied.status = ProposalStatus::Applied;
    Ok((next, applied))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub version: u64,
    pub thresholds: BTreeMap<String, ThresholdSet>,
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PushError {
    #[error("policy v{0} is not approved")]
    NotApproved(u64),
    #[error("unknown kpi {0}")]
    UnknownKpi(String),
    #[error("unknown rule {0}")]
    UnknownRule(String),
    #[error("{0}")]
    Inconsistent(String),
}

/// Pushes thresholds, the recovery notification level and rule patches into
/// the live KPI definitions and ruleset. Either everything applies or nothing.
pub fn push_updates_to_acl(doc: &PolicyDocument, kpis: &mut KpiStore, rules: &mut Vec<Rule>) -> Result<PatchSummary, PushError> {
    if doc.approval == Approval::Draft {
        return Err(PushError::NotApproved(doc.version));
    }
    let mut thresholds = doc.thresholds.clone();
    if kpis.definition(MTTR_KPI).is_some() {
        thresholds.entry(MTTR_KPI.to_string()).or_default().warn = Some(doc.recovery.notify_after_minutes);
    }
    let mut defs = Vec::new();
    for (kpi, t) in &thresholds {
        let mut def = kpis.definition(kpi).cloned().ok_or_else(|| PushError::UnknownKpi(kpi.clone()))?;
        if t.warn.is_some() {
            def.warn = t.warn;
        }
        if t.critical.is_some() {
            def.critical = t.critical;
        }
        def.check().map_err(PushError::Inconsistent)?;
        defs.push(def);
    }
    for patch in &doc.rule_patches {
        if !rules.iter().any(|r| r.id == patch.id) {
            return Err(PushError::UnknownRule(patch.id.clone()));
        }
    }
    for def in defs {
        kpis.define(def);
    }
    for patch in &doc.rule_patches {
        if let Some(slot) = rules.iter_mut().find(|r| r.id == patch.id) {
            *slot = patch.clone();
        }
    }
    Ok(PatchSummary { version: doc.version, thresholds, rules: doc.rule_patches.iter().map(|r| r.id.clone()).collect() })
}
