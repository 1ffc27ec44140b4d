//! Post-incident review: deterministic cause tagging and proposal templates.

use serde::{Deserialize, Serialize};

use crate::flow::event::{Event, Payload};
use crate::plant::{FailureCause, FaultKind, PlantEvent};

use super::incident::{IncidentError, IncidentRecord};
use super::policy::{AdaptationProposal, Evidence, PolicyDelta, ProposalSource, ProposalStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewConfig {
    pub humidity_crit: f64,
    pub seal_crit: f64,
    /// How far back a heat spike still counts as a cause.
    pub heat_lookback: u64,
    pub recovery_target_minutes: f64,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        ReviewConfig { humidity_crit: 0.8, seal_crit: 0.5, heat_lookback: 60, recovery_target_minutes: 10.0 }
    }
}

pub const TAG_HUMIDITY_SEAL: &str = "humidity_seal";
pub const TAG_HEAT_SPIKE: &str = "heat_spike";
pub const TAG_INJECTED: &str = "injected_fault";
pub const TAG_SLOW_RECOVERY: &str = "slow_recovery";
pub const TAG_UNKNOWN: &str = "unknown";
pub const SEAL_CHECK: &str = "seal_check";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub incident: String,
    pub tags: Vec<String>,
    pub proposals: Vec<AdaptationProposal>,
}

/// Tags a closed incident from its failure conditions and the events in
/// `history`, and maps tags to proposals.
pub fn post_incident_review(r: &IncidentRecord, history: &[Event], cfg: &ReviewConfig) -> Result<Review, IncidentError> {
    let Some(closed) = r.closed_at else {
        return Err(IncidentError::StillOpen(r.id.clone()));
    };
    let mut tags = Vec::new();
    let mut proposals = Vec::new();
    let proposal = |suffix: &str, change: PolicyDelta, why: String, events: Vec<u64>| AdaptationProposal {
        id: format!("{}.{suffix}", r.id),
        source: ProposalSource::PostIncident,
        change,
        evidence: Evidence { events, statistic: None },
        rationale: why,
        status: ProposalStatus::Pending,
    };

    if let Some(f) = &r.failure {
        if f.humidity > cfg.humidity_crit && f.seal_integrity < cfg.seal_crit {
            tags.push(TAG_HUMIDITY_SEAL.to_string());
            proposals.push(proposal(
                SEAL_CHECK,
                PolicyDelta::MaintenanceChecklist { add: SEAL_CHECK.into() },
                format!("{} failed at humidity {:.2} with seal {:.2}", f.sensor, f.humidity, f.seal_integrity),
                vec![r.trigger_event],
            ));
        }
        if f.cause == FailureCause::Injected {
            tags.push(TAG_INJECTED.to_string());
        }
    }
    let from = r.opened_at.tick().saturating_sub(cfg.heat_lookback);
    let spike = history.iter().find(|e| {
        e.time.tick() >= from
            && e.time <= r.opened_at
            && matches!(&e.payload, Payload::Plant(PlantEvent::FaultApplied { fault }) if fault.kind == FaultKind::HeatSpike)
    });
    if spike.is_some() {
        tags.push(TAG_HEAT_SPIKE.to_string());
    }
    if tags.is_empty() {
        tags.push(TAG_UNKNOWN.to_string());
    }
    if let Some(m) = r.mttr_minutes {
        if m > cfg.recovery_target_minutes {
            tags.push(TAG_SLOW_RECOVERY.to_string());
            proposals.push(proposal(
                "recovery",
                PolicyDelta::Recovery { scrutiny: true, notify_after_minutes: cfg.recovery_target_minutes / 2.0 },
                format!("recovery took {m} minutes instead of {}, closed at {closed}", cfg.recovery_target_minutes),
                vec![r.trigger_event],
            ));
        }
    }
    Ok(Review { incident: r.id.clone(), tags, proposals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::al::incident::{IncidentKind, IncidentTracker};
    use crate::model::{LayerId, SimTime};
    use crate::plant::{FaultSpec, SensorFailure, ENVIRONMENT};
    use std::collections::BTreeSet;

    fn failure(h: f64, seal: f64) -> SensorFailure {
        SensorFailure {
            sensor: "t1".into(),
            group: "temp".into(),
            critical: true,
            humidity: h,
            seal_integrity: seal,
            age_ticks: 100,
            cause: FailureCause::Hazard,
        }
    }

    fn closed(f: SensorFailure, open: u64, close: u64) -> IncidentRecord {
        let mut t = IncidentTracker::new(60.0);
        let id = t.open_incident(IncidentKind::SensorFailure, 4, SimTime(open), BTreeSet::new(), Some(f)).id.clone();
        t.close_incident(&id, SimTime(close)).unwrap()
    }

    #[test]
    fn humid_worn_seal_adds_seal_check() {
        let r = post_incident_review(&closed(failure(0.9, 0.3), 10, 12), &[], &ReviewConfig::default()).unwrap();
        assert_eq!(r.tags, [TAG_HUMIDITY_SEAL]);
        assert_eq!(r.proposals.len(), 1);
        assert_eq!(r.proposals[0].change, PolicyDelta::MaintenanceChecklist { add: SEAL_CHECK.into() });
    }

    #[test]
    fn benign_environment_is_unknown() {
        let r = post_incident_review(&closed(failure(0.4, 0.95), 10, 12), &[], &ReviewConfig::default()).unwrap();
        assert_eq!(r.tags, [TAG_UNKNOWN]);
        assert!(r.proposals.is_empty());
    }

    #[test]
    fn heat_spike_in_lookback() {
        let spike = Event {
            seq: 2,
            topic: "plant.fault".into(),
            source: LayerId::Structural,
            time: SimTime(8),
            payload: Payload::Plant(PlantEvent::FaultApplied {
                fault: FaultSpec {
                    kind: FaultKind::HeatSpike,
                    target: ENVIRONMENT.into(),
                    at_tick: SimTime(8),
                    magnitude: 0.4,
                    duration: Some(30),
                    level: None,
                },
            }),
        };
        let r = post_incident_review(&closed(failure(0.4, 0.95), 10, 12), &[spike], &ReviewConfig::default()).unwrap();
        assert_eq!(r.tags, [TAG_HEAT_SPIKE]);
    }

    #[test]
    fn slow_recovery_proposes_scrutiny() {
        let r = post_incident_review(&closed(failure(0.4, 0.95), 10, 30), &[], &ReviewConfig::default()).unwrap();
        assert!(r.tags.contains(&TAG_SLOW_RECOVERY.to_string()));
        assert_eq!(r.proposals[0].change, PolicyDelta::Recovery { scrutiny: true, notify_after_minutes: 5.0 });
    }

    #[test]
    fn review_is_deterministic_and_needs_closure() {
        let rec = closed(failure(0.9, 0.3), 10, 40);
        let cfg = ReviewConfig::default();
        assert_eq!(post_incident_review(&rec, &[], &cfg), post_incident_review(&rec, &[], &cfg));
        let mut open = rec.clone();
        open.closed_at = None;
        assert!(post_incident_review(&open, &[], &cfg).is_err());
    }
}
