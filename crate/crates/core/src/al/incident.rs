//! Incident records: opened on a critical failure or breach, closed once the
//! recovery condition holds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ticks_to_minutes, SimTime};
use crate::plant::SensorFailure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    SensorFailure,
    ThermalBreach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: String,
    pub kind: IncidentKind,
    pub opened_at: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<SimTime>,
    pub trigger_event: u64,
    pub affected: BTreeSet<String>,
    pub timeline: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mttr_ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mttr_minutes: Option<f64>,
    #[serde(default)]
    pub root_causes: Vec<String>,
    #[serde(default)]
    pub cm_effectiveness: BTreeMap<String, f64>,
    /// Conditions at the failure, for sensor incidents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<SensorFailure>,
}

impl IncidentRecord {
    pub fn is_closed(&self) -> bool {
        self.closed_at.is_some()
    }

    pub fn reviewed(&self) -> bool {
        !self.root_causes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IncidentError {
    #[error("no open incident {0}")]
    Unknown(String),
    #[error("incident {id} cannot close at {at} before opening at {opened}")]
    BeforeOpen { id: String, at: SimTime, opened: SimTime },
    #[error("incident {0} is still open")]
    StillOpen(String),
}

#[derive(Debug, Clone, Default)]
pub struct IncidentTracker {
    pub tick_seconds: f64,
    next: u32,
    open: BTreeMap<String, IncidentRecord>,
    closed: Vec<IncidentRecord>,
}

impl IncidentTracker {
    pub fn new(tick_seconds: f64) -> Self {
        IncidentTracker { tick_seconds, ..Self::default() }
    }

    pub fn open_incident(
        &mut self,
        kind: IncidentKind,
        trigger_event: u64,
        at: SimTime,
        affected: BTreeSet<String>,
        failure: Option<SensorFailure>,
    ) -> &IncidentRecord {
        self.next += 1;
        let id = format!("inc{:04}", self.next);
        let rec = IncidentRecord {
            id: id.clone(),
            kind,
            opened_at: at,
            closed_at: None,
            trigger_event,
            affected,
            timeline: vec![trigger_event],
            mttr_ticks: None,
            mttr_minutes: None,
            root_causes: Vec::new(),
            cm_effectiveness: BTreeMap::new(),
            failure,
        };
        self.open.insert(id.clone(), rec);
        &self.open[&id]
    }

    pub fn close_incident(&mut self, id: &str, at: SimTime) -> Result<IncidentRecord, IncidentError> {
        let rec = self.open.get(id).ok_or_else(|| IncidentError::Unknown(id.to_string()))?;
        if at < rec.opened_at {
            return Err(IncidentError::BeforeOpen { id: id.into(), at, opened: rec.opened_at });
        }
        let mut rec = self.open.remove(id).expect("checked above");
        let ticks = at.since(rec.opened_at);
        rec.closed_at = Some(at);
        rec.mttr_ticks = Some(ticks);
        rec.mttr_minutes = Some(ticks_to_minutes(ticks, self.tick_seconds));
        self.closed.push(rec.clone());
        Ok(rec)
    }

    pub fn open_ids(&self) -> Vec<String> {
        self.open.keys().cloned().collect()
    }

    pub fn open_records(&self) -> impl Iterator<Item = &IncidentRecord> {
        self.open.values()
    }

    pub fn closed(&self) -> &[IncidentRecord] {
        &self.closed
    }

    pub fn has_open(&self, kind: IncidentKind) -> bool {
        self.open.values().any(|r| r.kind == kind)
    }

    /// Appends `seq` to the timeline of every open incident touching `targets`.
    pub fn attach(&mut self, seq: u64, targets: &[&str]) {
        for rec in self.open.values_mut() {
            if targets.iter().any(|t| rec.affected.contains(*t)) {
                rec.timeline.push(seq);
            }
        }
    }

    pub fn note_effectiveness(&mut self, target: &str, effectiveness: f64) {
        for rec in self.open.values_mut() {
            if rec.affected.contains(target) {
                rec.cm_effectiveness.insert(target.to_string(), effectiveness);
            }
        }
    }

    /// Mean minutes to recovery over closed incidents, counting open ones
    /// at their elapsed time so far. Zero when nothing has happened.
    pub fn running_mttr_minutes(&self, now: SimTime) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for r in &self.closed {
            total += r.mttr_minutes.unwrap_or(0.0);
            n += 1;
        }
        for r in self.open.values() {
            total += ticks_to_minutes(now.since(r.opened_at), self.tick_seconds);
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Replaces a closed record (after review).
    pub fn update_closed(&mut self, rec: IncidentRecord) {
        if let Some(slot) = self.closed.iter_mut().find(|r| r.id == rec.id) {
            *slot = rec;
        }
    }
}

/// The recovery condition: full sensor coverage and deviation under warn.
pub fn recovered(availability: f64, deviation: f64, deviation_warn: f64) -> bool {
    availability >= 1.0 && deviation < deviation_warn
}
