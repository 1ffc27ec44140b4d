//! Resilience measures computed from a finished trace. Nothing here reads
//! simulator state: every number comes from the events alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::al::{IncidentRecord, ProposalStatus};
use crate::flow::event::{Event, Payload};
use crate::model::{DirectiveKind, SimTime};
use crate::plant::{PlantEvent, KPI_DEVIATION};

/// Mean per-incident recovery time in minutes over closed incidents.
/// `None` when nothing has closed; zero would read as instant recovery.
pub fn mttr<'a>(incidents: impl IntoIterator<Item = &'a IncidentRecord>) -> Option<f64> {
    let closed: Vec<f64> = incidents.into_iter().filter_map(|i| i.mttr_minutes).collect();
    if closed.is_empty() {
        None
    } else {
        Some(closed.iter().sum::<f64>() / closed.len() as f64)
    }
}

/// Ticks with a status event and ticks where a watched function was down.
/// `functions = None` watches every function the plant reports.
pub fn status_counts(trace: &[Event], functions: Option<&BTreeSet<String>>) -> (u64, u64) {
    let mut total = 0;
    let mut down = 0;
    for e in trace {
        if let Payload::Plant(PlantEvent::Status { up }) = &e.payload {
            total += 1;
            let is_down = up.iter().any(|(f, ok)| !ok && functions.is_none_or(|set| set.contains(f)));
            if is_down {
                down += 1;
            }
        }
    }
    (total, down)
}

/// Fraction of ticks with every watched function up; `None` for a trace
/// without plant ticks.
pub fn availability(trace: &[Event], functions: Option<&BTreeSet<String>>) -> Option<f64> {
    let (total, down) = status_counts(trace, functions);
    (total > 0).then(|| (total - down) as f64 / total as f64)
}

pub fn downtime_ticks(trace: &[Event]) -> u64 {
    status_counts(trace, None).1
}

/// Ticks from the incident opening to the first directive aimed at one of
/// its affected components while it was open; `None` when there was none.
pub fn time_to_mitigation(incident: &IncidentRecord, trace: &[Event]) -> Option<u64> {
    let within = |t: SimTime| t >= incident.opened_at && incident.closed_at.is_none_or(|c| t <= c);
    trace.iter().find_map(|e| match &e.payload {
        Payload::Directive(d) if e.topic == "directive.issued" && within(d.issued_at) && incident.affected.contains(&d.target) => {
            Some(d.issued_at.since(incident.opened_at))
        }
        _ => None,
    })
}

/// Latest known record of every incident, in opening order.
pub fn incidents(trace: &[Event]) -> Vec<IncidentRecord> {
    let mut order = Vec::new();
    let mut latest: BTreeMap<String, IncidentRecord> = BTreeMap::new();
    for e in trace {
        if let Payload::Incident(rec) = &e.payload {
            if !latest.contains_key(&rec.id) {
                order.push(rec.id.clone());
            }
            latest.insert(rec.id.clone(), rec.clone());
        }
    }
    order.into_iter().map(|id| latest.remove(&id).expect("recorded above")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Anticipation {
    /// Countermeasure activations that mitigate no open incident.
    pub preemptive_directives: usize,
    pub first_preemptive_tick: Option<u64>,
    /// Mean ticks from a pre-emptive directive to the next incident.
    pub mean_lead_ticks: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Resistance {
    pub peak_deviation: Option<f64>,
    /// Peak over ticks with an open incident.
    pub peak_deviation_under_fault: Option<f64>,
    pub critical_failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub incidents: usize,
    pub closed: usize,
    pub mttr_minutes: Option<f64>,
    pub availability: Option<f64>,
    pub downtime_ticks: u64,
    pub mean_time_to_mitigation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub reviewed: usize,
    pub reviewed_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub proposals: usize,
    pub applied: usize,
    pub policy_version_start: Option<u64>,
    pub policy_version_end: Option<u64>,
}

impl Adaptation {
    pub fn version_delta(&self) -> u64 {
        match (self.policy_version_start, self.policy_version_end) {
            (Some(a), Some(b)) => b.saturating_sub(a),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub acl: Option<String>,
    pub al: Vec<String>,
    pub ticks: u64,
    pub anticipation: Anticipation,
    pub resistance: Resistance,
    pub recovery: Recovery,
    pub error_analysis: ErrorAnalysis,
    pub adaptation: Adaptation,
}

pub fn resilience_report(trace: &[Event]) -> ResilienceReport {
    let mut r = ResilienceReport::default();
    let mut open: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut preemptive: Vec<SimTime> = Vec::new();
    let mut opened_at: Vec<SimTime> = Vec::new();
    let mut deviation: Vec<(SimTime, f64, bool)> = Vec::new();
    let mut proposals: BTreeMap<String, ProposalStatus> = BTreeMap::new();
    for e in trace {
        match &e.payload {
            Payload::RunStarted(h) => {
                r.scenario = Some(h.scenario.name.clone());
                r.seed = Some(h.seed);
                r.acl = Some(h.acl.name().to_string());
                r.al = h.al.iter().map(|v| v.name().to_string()).collect();
            }
            Payload::RunFinished { ticks } => r.ticks = *ticks,
            Payload::Incident(rec) => match e.topic.as_str() {
                "incident.opened" => {
                    open.insert(rec.id.clone(), rec.affected.clone());
                    opened_at.push(rec.opened_at);
                }
                "incident.closed" => {
                    open.remove(&rec.id);
                }
                _ => {}
            },
            Payload::Directive(d)
                if e.topic == "directive.issued"
                    && d.kind == DirectiveKind::ActivateCm
                    && !open.values().any(|affected| affected.contains(&d.target)) =>
            {
                preemptive.push(d.issued_at);
            }
            Payload::Kpi(s) if s.kpi == KPI_DEVIATION => deviation.push((s.time, s.value, false)),
            Payload::Plant(PlantEvent::SensorFailed(f)) if f.critical => r.resistance.critical_failures += 1,
            Payload::Adaptation(p) => {
                proposals.insert(p.id.clone(), p.status);
            }
            Payload::PolicyPush(s) => {
                r.adaptation.policy_version_start.get_or_insert(s.version);
                r.adaptation.policy_version_end = Some(s.version);
            }
            _ => {}
        }
        // Deviation samples are published before the tick's incidents open,
        // so mark the tick once its incident bookkeeping is visible.
        if let (Some(last), false) = (deviation.last_mut(), open.is_empty()) {
            if last.0 == e.time {
                last.2 = true;
            }
        }
    }

    r.anticipation.preemptive_directives = preemptive.len();
    r.anticipation.first_preemptive_tick = preemptive.first().map(|t| t.tick());
    let leads: Vec<u64> =
        preemptive.iter().filter_map(|d| opened_at.iter().find(|o| *o > d).map(|o| o.since(*d))).collect();
    if !leads.is_empty() {
        r.anticipation.mean_lead_ticks = Some(leads.iter().sum::<u64>() as f64 / leads.len() as f64);
    }

    r.resistance.peak_deviation = deviation.iter().map(|d| d.1).reduce(f64::max);
    r.resistance.peak_deviation_under_fault = deviation.iter().filter(|d| d.2).map(|d| d.1).reduce(f64::max);

    let all = incidents(trace);
    let closed: Vec<&IncidentRecord> = all.iter().filter(|i| i.is_closed()).collect();
    r.recovery.incidents = all.len();
    r.recovery.closed = closed.len();
    r.recovery.mttr_minutes = mttr(closed.iter().copied());
    r.recovery.availability = availability(trace, None);
    r.recovery.downtime_ticks = downtime_ticks(trace);
    let ttm: Vec<u64> = all.iter().filter_map(|i| time_to_mitigation(i, trace)).collect();
    if !ttm.is_empty() {
        r.recovery.mean_time_to_mitigation = Some(ttm.iter().sum::<u64>() as f64 / ttm.len() as f64);
    }

    r.error_analysis.reviewed = closed.iter().filter(|i| i.reviewed()).count();
    if !closed.is_empty() {
        r.error_analysis.reviewed_fraction = Some(r.error_analysis.reviewed as f64 / closed.len() as f64);
    }

    r.adaptation.proposals = proposals.len();
    r.adaptation.applied = proposals.values().filter(|s| **s == ProposalStatus::Applied).count();
    r
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

impl ResilienceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "run: scenario={} seed={} acl={} al={} ticks={}",
            self.scenario.as_deref().unwrap_or("?"),
            self.seed.map_or("?".into(), |x| x.to_string()),
            self.acl.as_deref().unwrap_or("?"),
            if self.al.is_empty() { "none".to_string() } else { self.al.join(",") },
            self.ticks
        );
        let a = &self.anticipation;
        let _ = writeln!(
            s,
            "anticipation: preemptive={} first_at={} mean_lead={}",
            a.preemptive_directives,
            a.first_preemptive_tick.map_or("n/a".into(), |t| format!("t{t}")),
            opt(a.mean_lead_ticks, 1)
        );
        let z = &self.resistance;
        let _ = writeln!(
            s,
            "resistance: peak_deviation={} under_fault={} critical_failures={}",
            opt(z.peak_deviation, 3),
            opt(z.peak_deviation_under_fault, 3),
            z.critical_failures
        );
        let c = &self.recovery;
        let _ = writeln!(
            s,
            "recovery: incidents={} closed={} mttr_min={} availability={} downtime={} ttm={}",
            c.incidents,
            c.closed,
            opt(c.mttr_minutes, 2),
            opt(c.availability, 4),
            c.downtime_ticks,
            opt(c.mean_time_to_mitigation, 2)
        );
        let _ = writeln!(
            s,
            "error_analysis: reviewed={} fraction={}",
            self.error_analysis.reviewed,
            opt(self.error_analysis.reviewed_fraction, 2)
        );
        let d = &self.adaptation;
        let _ = writeln!(
            s,
            "adaptation: proposals={} applied={} policy_version={}->{}",
            d.proposals,
            d.applied,
            d.policy_version_start.map_or("?".into(), |v| v.to_string()),
            d.policy_version_end.map_or("?".into(), |v| v.to_string())
        );
        s
    }
}
