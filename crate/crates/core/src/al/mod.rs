//! Adaptation and learning: incident records and reviews, recurring-pattern
//! analysis, data-driven threshold fitting and governed policy updates.

pub mod datafit;
pub mod incident;
pub mod policy;
pub mod review;
pub mod trend;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use datafit::{fit_adaptation_model, point_biserial, quantile, FitConfig, FitStats, Observation};
pub use incident::{recovered, IncidentError, IncidentKind, IncidentRecord, IncidentTracker};
pub use policy::{
    apply_policy_update, push_updates_to_acl, replay_changelog, AdaptationProposal, Approval, ApprovalMode, ChangelogEntry,
    Evidence, PatchSummary, PolicyDelta, PolicyDocument, PolicyError, PolicyGuards, ProposalSource, ProposalStatus,
    PushError, ThresholdSet,
};
pub use review::{post_incident_review, Review, ReviewConfig};
pub use trend::{autocorrelation, learning_loop, FailureHistory, LoopConfig, StatisticKind, TrendReport};

/// Which learning variants run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlVariant {
    Review,
    Loop,
    Policy,
    Datafit,
}

impl AlVariant {
    pub const ALL: [AlVariant; 4] = [AlVariant::Review, AlVariant::Loop, AlVariant::Policy, AlVariant::Datafit];

    pub fn name(self) -> &'static str {
        match self {
            AlVariant::Review => "review",
            AlVariant::Loop => "loop",
            AlVariant::Policy => "policy",
            AlVariant::Datafit => "datafit",
        }
    }

    /// Parses `none` or a comma list such as `review,policy`.
    pub fn parse_set(s: &str) -> Result<BTreeSet<AlVariant>, String> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(BTreeSet::new());
        }
        s.split(',')
            .map(|p| {
                let p = p.trim();
                AlVariant::ALL.into_iter().find(|v| v.name() == p).ok_or_else(|| format!("unknown learning variant {p}"))
            })
            .collect()
    }
}

/// A published policy change is its changelog entry.
pub type PolicyChange = ChangelogEntry;
