//! Cooperating agents that publish proposals on the bus; the coordinator
//! arbitrates per target before the usual conflict resolution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::flow::bus::{Bus, SubscriberId};
use crate::flow::event::Payload;
use crate::model::{Directive, DirectiveKind, LayerId};
use crate::plant::{spare_kpi, standby_kpi, KPI_DEVIATION, KPI_HUMIDITY, KPI_REPAIR_BACKLOG, KPI_TEMPERATURE};

use super::rules::{risk_id, MAINTENANCE, MTTR_KPI};
use super::DecisionContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProposal {
    pub agent_id: String,
    pub proposed: Directive,
    pub urgency: f64,
    pub rationale: String,
    /// KPIs whose state supports the proposal.
    #[serde(default)]
    pub evidence_kpis: Vec<String>,
}

pub trait Agent {
    fn id(&self) -> &str;
    /// At most one proposal per target.
    fn propose(&self, ctx: &DecisionContext) -> Result<Vec<AgentProposal>, String>;
}

fn proposal(agent: &str, ctx: &DecisionContext, kind: DirectiveKind, target: &str, priority: i64, urgency: f64, why: String) -> AgentProposal {
    let d = Directive::new(format!("m{:06}.{agent}.{target}", ctx.time.tick()), kind, target)
        .with_priority(priority)
        .issued(LayerId::AdaptiveCoordination, ctx.time);
    AgentProposal { agent_id: agent.into(), proposed: d, urgency, rationale: why, evidence_kpis: Vec::new() }
}

/// Watches per-group failure risk and redundancy.
#[derive(Debug, Clone)]
pub struct SensorAgent {
    pub groups: Vec<String>,
    pub hazard_threshold: f64,
}

impl Agent for SensorAgent {
    fn id(&self) -> &str {
        "sensor_agent"
    }

    fn propose(&self, ctx: &DecisionContext) -> Result<Vec<AgentProposal>, String> {
        let mut out = Vec::new();
        for g in &self.groups {
            let standby = ctx.kpis.latest(&standby_kpi(g)).unwrap_or(0.0);
            let spare = ctx.kpis.latest(&spare_kpi(g)).unwrap_or(0.0);
            let risk = ctx.scalar(&format!("risk.{}", risk_id(g))).unwrap_or(0.0);
            if standby < 1.0 {
                continue;
            }
            if spare < 0.0 {
                out.push(proposal(self.id(), ctx, DirectiveKind::ActivateCm, g, 85, 1.0, format!("{g} below required coverage")));
            } else if risk > self.hazard_threshold && spare < 1.0 {
                let mut p = proposal(self.id(), ctx, DirectiveKind::ActivateCm, g, 80, risk, format!("{g} failure probability {risk:.2}"));
                p.evidence_kpis.push(spare_kpi(g));
                out.push(p);
            }
        }
        Ok(out)
    }
}

/// Expedites repairs when recovery is slow and calibrates at-risk sensors.
#[derive(Debug, Clone)]
pub struct MaintenanceAgent {
    pub hazard_threshold: f64,
    /// Seals below this are renewed by a calibration visit.
    pub seal_floor: f64,
}

impl Agent for MaintenanceAgent {
    fn id(&self) -> &str {
        "maintenance_agent"
    }

    fn propose(&self, ctx: &DecisionContext) -> Result<Vec<AgentProposal>, String> {
        let mut out = Vec::new();
        if ctx.kpis.status(MTTR_KPI).level() >= 1.0 && ctx.kpis.latest(KPI_REPAIR_BACKLOG).is_some_and(|b| b >= 1.0) {
            let mut p = proposal(self.id(), ctx, DirectiveKind::NotifyMaintenance, MAINTENANCE, 70, 0.6, "recovery slower than target".into());
            p.evidence_kpis.push(MTTR_KPI.into());
            out.push(p);
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in ctx.risks.iter().filter(|r| r.probability > self.hazard_threshold) {
            for s in &r.affected_components {
                if seen.insert(s.clone()) {
                    let mut p = proposal(
                        self.id(),
                        ctx,
                        DirectiveKind::NotifyMaintenance,
                        s,
                        75,
                        r.probability,
                        format!("preventive calibration of {s}"),
                    );
                    p.proposed.parameters.insert("seal_check".into(), self.seal_floor);
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

/// Adjusts cooling to the temperature deviation and humidity.
#[derive(Debug, Clone)]
pub struct CoolingAgent {
    pub cooling_cm: Option<String>,
    pub humidity_cm: Option<String>,
    pub slope_crit: f64,
    pub deviation_floor: f64,
    pub release_temperature: f64,
}

impl Agent for CoolingAgent {
    fn id(&self) -> &str {
        "cooling_agent"
    }

    fn propose(&self, ctx: &DecisionContext) -> Result<Vec<AgentProposal>, String> {
        let mut out = Vec::new();
        if let Some(cm) = &self.cooling_cm {
            let dev = ctx.kpis.latest(KPI_DEVIATION).unwrap_or(0.0);
            let level = ctx.kpis.status(KPI_DEVIATION).level();
            let slope = ctx.scalar(&format!("slope.{KPI_DEVIATION}")).unwrap_or(0.0);
            let engaged = ctx.engaged(cm);
            if !engaged && (level >= 1.0 || (dev > self.deviation_floor && slope > self.slope_crit)) {
                let mut p = proposal(self.id(), ctx, DirectiveKind::ActivateCm, cm, 90, (dev / 10.0).min(1.0), format!("deviation {dev:.2} K"));
                p.evidence_kpis.push(KPI_DEVIATION.into());
                out.push(p);
            } else if engaged && level == 0.0 && slope <= 0.0 && ctx.kpis.latest(KPI_TEMPERATURE).is_some_and(|t| t < self.release_temperature) {
                out.push(proposal(self.id(), ctx, DirectiveKind::DeactivateCm, cm, 10, 0.1, "temperature back under control".into()));
            }
        }
        if let Some(cm) = &self.humidity_cm {
            let level = ctx.kpis.status(KPI_HUMIDITY).level();
            if level >= 1.0 && !ctx.engaged(cm) {
                let mut p = proposal(self.id(), ctx, DirectiveKind::ActivateCm, cm, 60, 0.5, "humidity above warn level".into());
                p.evidence_kpis.push(KPI_HUMIDITY.into());
                out.push(p);
            } else if level == 0.0 && ctx.engaged(cm) {
                out.push(proposal(self.id(), ctx, DirectiveKind::DeactivateCm, cm, 10, 0.1, "humidity normal".into()));
            }
        }
        Ok(out)
    }
}

/// Per target, the most urgent proposal wins (ties: lower agent id).
/// Returns the winners in input order and the losers with a reason.
pub fn arbitrate(proposals: Vec<AgentProposal>) -> (Vec<AgentProposal>, Vec<(AgentProposal, String)>) {
    let mut best: BTreeMap<String, usize> = BTreeMap::new();
    for (i, p) in proposals.iter().enumerate() {
        let slot = best.entry(p.proposed.target.clone()).or_insert(i);
        let cur = &proposals[*slot];
        if p.urgency > cur.urgency || (p.urgency == cur.urgency && p.agent_id < cur.agent_id) {
            *slot = i;
        }
    }
    let mut winners = Vec::new();
    let mut losers = Vec::new();
    for (i, p) in proposals.iter().enumerate() {
        let w = best[&p.proposed.target];
        if w == i {
            winners.push(p.clone());
        } else {
            let win = &proposals[w];
            losers.push((p.clone(), format!("lost to {} (urgency {:.3} vs {:.3})", win.agent_id, win.urgency, p.urgency)));
        }
    }
    (winners, losers)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiOutcome {
    pub directives: Vec<Directive>,
    pub losers: Vec<(AgentProposal, String)>,
    pub diagnostics: Vec<String>,
}

/// Runs the agents in id order, publishes their proposals, collects them from
/// the coordinator's mailbox and arbitrates.
pub fn multi_agent_decide(agents: &[Box<dyn Agent>], ctx: &DecisionContext, bus: &mut Bus, coordinator: SubscriberId) -> MultiOutcome {
    let mut out = MultiOutcome::default();
    let mut order: Vec<&Box<dyn Agent>> = agents.iter().collect();
    order.sort_by(|a, b| a.id().cmp(b.id()));
    for agent in order {
        match agent.propose(ctx) {
            Ok(ps) => {
                for p in ps {
                    bus.publish(format!("agent.proposal.{}", agent.id()), LayerId::AdaptiveCoordination, ctx.time, Payload::Proposal(p));
                }
            }
            Err(e) => out.diagnostics.push(format!("{} skipped: {e}", agent.id())),
        }
    }
    let collected: Vec<AgentProposal> = bus
        .drain(coordinator)
        .into_iter()
        .filter_map(|e| match e.payload {
            Payload::Proposal(p) => Some(p),
            _ => None,
        })
        .collect();
    let (winners, losers) = arbitrate(collected);
    out.directives = winners.into_iter().map(|p| p.proposed).collect();
    crate::model::sort_directives(&mut out.directives);
    out.losers = losers;
    out
}
