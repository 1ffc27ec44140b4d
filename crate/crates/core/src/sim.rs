//! The per-tick loop: plant -> data flow -> steering -> coordination ->
//! steering dispatch -> learning hooks. Everything observable goes through
//! the bus, so the trace alone describes the run.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use crate::acl::advisor::{advisor_decide, KeywordAdvisor};
use crate::acl::agent::{learn, learning_agent_decide, AgentPolicyTable, AgentTargets, Transition};
use crate::acl::feedback::{kpi_feedback_decide, KpiFeedbackConfig, KpiFeedbackState};
use crate::acl::multi::{multi_agent_decide, Agent, CoolingAgent, MaintenanceAgent, SensorAgent};
use crate::acl::rules::{rule_engine_decide, Rule, MAINTENANCE, MTTR_KPI};
use crate::acl::{resolve_conflicts, AclVariant, DecisionContext, Escalator, PriorityShift};
use crate::al::datafit::{fit_adaptation_model, FitStats, Observation};
use crate::al::incident::{recovered, IncidentKind, IncidentTracker};
use crate::al::policy::{
    apply_policy_update, push_updates_to_acl, AdaptationProposal, ApprovalMode, PolicyDocument, PolicyError, ProposalStatus,
};
use crate::al::review::{post_incident_review, SEAL_CHECK};
use crate::al::trend::{learning_loop, FailureHistory};
use crate::al::AlVariant;
use crate::defense::DefenseLayer;
use crate::flow::bus::{Bus, SubscriberId};
use crate::flow::event::{Event, Payload};
use crate::flow::kpi::{KpiDefinition, KpiSnapshot, KpiStore, ThresholdStatus};
use crate::model::{
    Directive, DirectiveKind, FeedbackReport, FeedbackStatus, KpiSample, LayerId, SimTime,
};
use crate::plant::{
    FailureCause, FaultSpec, Plant, PlantEvent, SensorState, ENVIRONMENT, KPI_AVAILABILITY, KPI_DEVIATION, KPI_HUMIDITY,
};
use crate::rng::{self, Stream};
use crate::scenario::{ApprovalSetting, RunHeader, Scenario};
use crate::steering::{Layers, LayerEvent, LearningPattern, SideEffect, Steering};
use crate::structural::StructuralLayer;

/// Maintenance interval used when the checklist is non-empty but the policy
/// sets no interval.
pub const DEFAULT_MAINTENANCE_INTERVAL: u64 = 100;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invariant breached at {at}: {message}")]
    Invariant { at: SimTime, message: String, trace: Vec<Event> },
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub header: RunHeader,
    pub trace: Vec<Event>,
    /// Every policy version the run went through, starting with the initial one.
    pub policies: Vec<PolicyDocument>,
    pub agent_table: Option<AgentPolicyTable>,
    /// Sum of the learning agent's per-tick rewards.
    pub agent_reward: f64,
    pub fit: Option<FitStats>,
}

impl SimOutput {
    pub fn policy(&self) -> &PolicyDocument {
        self.policies.last().expect("initial policy recorded")
    }
}

pub fn run(header: &RunHeader) -> Result<SimOutput, SimError> {
    let mut sim = Sim::new(header.clone());
    for _ in 0..header.ticks {
        sim.tick()?;
    }
    Ok(sim.finish())
}

struct PendingTransition {
    state: String,
    action: crate::acl::agent::AgentAction,
    cost: f64,
}

struct Sim {
    header: RunHeader,
    scenario: Scenario,
    plant: Plant,
    structural: StructuralLayer,
    defense: DefenseLayer,
    steering: Steering,
    bus: Bus,
    kpis: KpiStore,
    rules: Vec<Rule>,
    faults: Vec<FaultSpec>,
    next_fault: usize,
    plant_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    budget: f64,
    shift: Option<PriorityShift>,
    overrides: BTreeMap<String, (KpiDefinition, Option<SimTime>)>,
    feedback: Vec<FeedbackReport>,
    escalator: Escalator,
    incidents: IncidentTracker,
    feedback_state: KpiFeedbackState,
    feedback_cfg: KpiFeedbackConfig,
    agents: Vec<Box<dyn Agent>>,
    coordinator: SubscriberId,
    al_inbox: SubscriberId,
    advisor: KeywordAdvisor,
    corpus: Vec<String>,
    table: Option<AgentPolicyTable>,
    pending: Option<PendingTransition>,
    agent_reward: f64,
    policy: PolicyDocument,
    policies: Vec<PolicyDocument>,
    proposals: Vec<AdaptationProposal>,
    approval: ApprovalMode,
    history: FailureHistory,
    humidity_by_tick: Vec<f64>,
    hazard_failures: Vec<(u64, f64, u64)>,
    fit: Option<FitStats>,
}

fn enabled(h: &RunHeader, v: AlVariant) -> bool {
    h.al.contains(&v)
}

impl Sim {
    fn new(header: RunHeader) -> Self {
        let scenario = header.scenario.clone();
        let plant = Plant::new(scenario.plant.clone(), scenario.environment.clone(), scenario.groups.clone(), &scenario.sensors);
        let mut steering_cfg = scenario.steering.clone();
        steering_cfg.risk_rules = scenario.risk_rules();
        let steering = Steering::new(steering_cfg, scenario.registry());
        let defs = scenario.kpi_definitions();
        let kpis = KpiStore::new(&defs, scenario.z_crit, 10);
        let mut bus = Bus::new();
        let coordinator = bus.new_subscriber();
        bus.subscribe(coordinator, "agent.proposal.*");
        let al_inbox = bus.new_subscriber();
        bus.subscribe(al_inbox, "incident.closed");
        bus.subscribe(al_inbox, "learning.trigger");
        let acl = &scenario.acl;
        let agents: Vec<Box<dyn Agent>> = vec![
            Box::new(SensorAgent { groups: scenario.critical_groups(), hazard_threshold: acl.risk_trigger }),
            Box::new(MaintenanceAgent { hazard_threshold: acl.risk_trigger, seal_floor: acl.seal_floor }),
            Box::new(CoolingAgent {
                cooling_cm: scenario.cooling_cm(),
                humidity_cm: scenario.humidity_cm(),
                slope_crit: acl.feedback.slope_crit,
                deviation_floor: acl.feedback.deviation_floor,
                release_temperature: scenario.release_temperature(),
            }),
        ];
        let humidity_warn = defs.iter().find(|d| d.id == KPI_HUMIDITY).and_then(|d| d.warn);
        let advisor = KeywordAdvisor { config: acl.advisor.clone(), humidity_warn, humidity_cm: scenario.humidity_cm() };
        let table = (header.acl == AclVariant::Agent).then(|| header.agent_table.clone().unwrap_or_else(|| acl.agent.table()));
        let approval = match scenario.al.approval {
            ApprovalSetting::Auto => ApprovalMode::Auto,
            ApprovalSetting::Manual => ApprovalMode::Manual { approvals: header.approvals.clone() },
        };
        let policy = scenario.initial_policy();
        Sim {
            faults: scenario.fault_schedule(header.seed),
            next_fault: 0,
            plant_rng: rng::stream(header.seed, Stream::Plant),
            explore_rng: rng::stream(header.seed, Stream::Exploration),
            budget: acl.budget_cap,
            shift: None,
            overrides: BTreeMap::new(),
            feedback: Vec::new(),
            escalator: Escalator::new(acl.escalation),
            incidents: IncidentTracker::new(scenario.tick_seconds),
            feedback_state: KpiFeedbackState::default(),
            feedback_cfg: scenario.feedback_config(),
            agents,
            coordinator,
            al_inbox,
            advisor,
            corpus: scenario.corpus.clone(),
            table,
            pending: None,
            agent_reward: 0.0,
            policies: vec![policy.clone()],
            policy,
            proposals: Vec::new(),
            approval,
            history: BTreeMap::new(),
            humidity_by_tick: Vec::new(),
            hazard_failures: Vec::new(),
            fit: None,
            rules: scenario.rules(),
            structural: StructuralLayer::new(&scenario.resources),
            defense: DefenseLayer::new(&scenario.countermeasures, acl.sample_cost),
            steering,
            kpis,
            bus,
            plant,
            scenario,
            header,
        }
        .started()
    }

    fn started(mut self) -> Self {
        let header = Box::new(self.header.clone());
        self.publish("run.started", LayerId::DataInformationFlow, SimTime::ZERO, Payload::RunStarted(header));
        self.push_policy(SimTime::ZERO);
        self
    }

    fn publish(&mut self, topic: impl Into<String>, source: LayerId, time: SimTime, payload: Payload) -> u64 {
        self.bus.publish(topic, source, time, payload).0
    }

    fn diagnostic(&mut self, at: SimTime, source: LayerId, message: String) {
        self.publish("diagnostic", source, at, Payload::Diagnostic { message });
    }

    fn breach(&self, at: SimTime, message: String) -> SimError {
        SimError::Invariant { at, message, trace: self.bus.trace().to_vec() }
    }

    fn tick(&mut self) -> Result<(), SimError> {
        let now = self.plant.state.time.plus(1);
        let tick_start = self.bus.next_seq();
        let sensor_ids: Vec<String> = self.plant.state.sensors.iter().map(|s| s.id.clone()).collect();

        // Tick-boundary housekeeping.
        if self.budget < self.scenario.acl.budget_cap {
            self.budget = (self.budget + self.scenario.acl.budget_per_tick).min(self.scenario.acl.budget_cap);
        }
        let expired: Vec<String> =
            self.overrides.iter().filter(|(_, (_, until))| until.is_some_and(|u| u <= now)).map(|(k, _)| k.clone()).collect();
        for k in expired {
            let (def, _) = self.overrides.remove(&k).expect("listed above");
            self.kpis.define(def);
        }
        for ev in self.structural.advance(&mut self.plant, now) {
            self.publish("structural.event", LayerId::Structural, now, Payload::Structural(ev));
        }
        for ev in self.defense.advance(&self.plant) {
            self.publish("defense.event", LayerId::RiskSpecificDefense, now, Payload::Defense(ev));
        }

        // Plant step and data flow.
        let mut due = Vec::new();
        while self.next_fault < self.faults.len() && self.faults[self.next_fault].at_tick <= now {
            if self.faults[self.next_fault].at_tick == now {
                due.push(self.faults[self.next_fault].clone());
            }
            self.next_fault += 1;
        }
        let controls = self.defense.controls();
        let out = self.plant.step(&controls, &due, &mut self.plant_rng);
        if !self.plant.state.temperature.is_finite() {
            return Err(self.breach(now, format!("temperature is {}", self.plant.state.temperature)));
        }
        let mut down = false;
        let mut failures = Vec::new();
        for ev in out.events {
            let topic = match &ev {
                PlantEvent::FaultApplied { .. } => "plant.fault_applied",
                PlantEvent::FaultRejected { .. } => "plant.fault_rejected",
                PlantEvent::SensorFailed(_) => "plant.sensor_failed",
                PlantEvent::SensorRepaired { .. } => "plant.sensor_repaired",
                PlantEvent::Status { up } => {
                    down = up.values().any(|u| !u);
                    "plant.status"
                }
            };
            let failed = match &ev {
                PlantEvent::SensorFailed(f) => Some(f.clone()),
                _ => None,
            };
            let seq = self.publish(topic, LayerId::DataInformationFlow, now, Payload::Plant(ev));
            if let Some(f) = failed {
                failures.push((seq, f));
            }
        }
        for s in &out.samples {
            self.record(s.clone())?;
        }
        let ambient = self.plant.state.ambient_humidity;
        self.humidity_by_tick.push(ambient);

        // Incidents.
        for (seq, f) in failures {
            self.history.entry(f.group.clone()).or_default().push((now, seq));
            if f.cause == FailureCause::Hazard && f.critical {
                self.hazard_failures.push((now.tick(), ambient, seq));
                let cond = if ambient > self.scenario.plant.hazard.h_crit { "under high humidity" } else { "in normal conditions" };
                self.corpus.push(format!("{now}: sensor failure on {} {cond} ({ambient:.2})", f.sensor));
            }
            if f.critical {
                let affected = BTreeSet::from([f.sensor.clone(), f.group.clone()]);
                let rec = self.incidents.open_incident(IncidentKind::SensorFailure, seq, now, affected, Some(f)).clone();
                self.publish("incident.opened", LayerId::AdaptationLearning, now, Payload::Incident(rec));
            }
        }
        let deviation = self.plant.state.deviation();
        if deviation > self.scenario.plant.deviation_critical && !self.incidents.has_open(IncidentKind::ThermalBreach) {
            let mut affected = BTreeSet::from([ENVIRONMENT.to_string()]);
            for c in &self.scenario.countermeasures {
                if c.protects.iter().any(|p| p == ENVIRONMENT) {
                    affected.insert(c.id.clone());
                }
            }
            let trigger = self.bus.next_seq().saturating_sub(1);
            let rec = self.incidents.open_incident(IncidentKind::ThermalBreach, trigger, now, affected, None).clone();
            self.publish("incident.opened", LayerId::AdaptationLearning, now, Payload::Incident(rec));
        }
        let dev_warn = self.kpis.definition(KPI_DEVIATION).and_then(|d| d.warn).unwrap_or(f64::INFINITY);
        if recovered(self.plant.sensor_availability(), deviation, dev_warn) {
            for id in self.incidents.open_ids() {
                let rec = self.incidents.close_incident(&id, now).map_err(|e| self.breach(now, e.to_string()))?;
                self.publish("incident.closed", LayerId::AdaptationLearning, now, Payload::Incident(rec));
            }
        }
        let mttr = self.incidents.running_mttr_minutes(now);
        self.record(KpiSample::new(MTTR_KPI, now, mttr))?;

        // Snapshot, anomalies, risks.
        let snapshot = self.kpis.snapshot(now);
        self.publish("kpi.snapshot", LayerId::DataInformationFlow, now, Payload::Snapshot(snapshot.clone()));
        for a in snapshot.anomalies().cloned().collect::<Vec<_>>() {
            let kpi = a.kpi.clone();
            let seq = self.publish(format!("anomaly.{kpi}"), LayerId::DataInformationFlow, now, Payload::Anomaly(a));
            let pattern = LearningPattern {
                topic: "anomaly".into(),
                target: kpi.clone(),
                description: format!("anomalous {kpi}"),
                support: vec![seq],
            };
            self.trigger(&pattern, now)?;
        }
        let recent: Vec<Event> = self.bus.trace()[tick_start as usize..].to_vec();
        let risks = self.steering.assess(&snapshot, &recent, now);
        for r in &risks {
            self.publish("risk.assessed", LayerId::IntegrationSteering, now, Payload::Risk(r.clone()));
        }

        // Coordination.
        let window = self.steering.config.feedback_window;
        self.feedback.retain(|f| now.since(f.completed_at) < window);
        let ctx = DecisionContext {
            time: now,
            kpis: snapshot,
            risks,
            cm_states: self.defense.states(),
            recent_feedback: self.feedback.clone(),
            budget: self.budget,
            active_priority_shift: self.shift.filter(|s| s.is_active(now)),
        };
        let proposals = self.decide(&ctx, down)?;
        let res = resolve_conflicts(
            &proposals,
            self.budget,
            &self.steering.registry,
            ctx.active_priority_shift.as_ref(),
            self.scenario.acl.priority_bonus,
            now,
        );
        if res.spent > self.budget + 1e-9 {
            return Err(self.breach(now, format!("spent {} over budget {}", res.spent, self.budget)));
        }
        self.budget -= res.spent;
        if let Some(p) = self.pending.as_mut() {
            p.cost = res.spent;
        }
        for (d, reason) in res.rejected {
            self.publish("directive.rejected", LayerId::AdaptiveCoordination, now, Payload::DirectiveRejected { directive: d, reason });
        }
        for d in res.accepted {
            self.dispatch(d, LayerId::AdaptiveCoordination, now)?;
        }

        // Learning hooks.
        self.learning(now)?;
        if let Some(interval) = self.maintenance_interval() {
            if now.tick() % interval == 0 {
                let d = Directive::new(format!("s{:06}.{SEAL_CHECK}", now.tick()), DirectiveKind::NotifyMaintenance, MAINTENANCE)
                    .with_param(SEAL_CHECK, self.scenario.acl.seal_floor)
                    .issued(LayerId::AdaptationLearning, now);
                self.dispatch(d, LayerId::AdaptationLearning, now)?;
            }
        }
        if let Some(report) = self.steering.run_audit(now, &self.policy, &self.kpis.definitions().cloned().collect::<Vec<_>>(), &self.rules) {
            self.publish("audit.report", LayerId::IntegrationSteering, now, Payload::Audit(report));
        }

        let ids: Vec<String> = self.plant.state.sensors.iter().map(|s| s.id.clone()).collect();
        if ids != sensor_ids {
            return Err(self.breach(now, "sensor roster changed".into()));
        }
        Ok(())
    }

    fn record(&mut self, s: KpiSample) -> Result<(), SimError> {
        let at = s.time;
        self.kpis.record(&s).map_err(|e| self.breach(at, e.to_string()))?;
        let topic = format!("kpi.{}", s.kpi);
        self.publish(topic, LayerId::DataInformationFlow, at, Payload::Kpi(s));
        Ok(())
    }

    fn trigger(&mut self, pattern: &LearningPattern, now: SimTime) -> Result<(), SimError> {
        self.steering.trigger_learning(pattern, now, &mut self.bus).map_err(|e| self.breach(now, e.to_string()))?;
        Ok(())
    }

    fn maintenance_interval(&self) -> Option<u64> {
        let m = &self.policy.maintenance;
        if m.checklist.iter().any(|c| c == SEAL_CHECK) {
            Some(m.interval_ticks.unwrap_or(DEFAULT_MAINTENANCE_INTERVAL).max(1))
        } else {
            None
        }
    }

    fn decide(&mut self, ctx: &DecisionContext, down: bool) -> Result<Vec<Directive>, SimError> {
        let now = ctx.time;
        let src = LayerId::AdaptiveCoordination;
        Ok(match self.header.acl {
            AclVariant::Off => Vec::new(),
            AclVariant::Rules => {
                let out = rule_engine_decide(&self.rules, ctx);
                for m in out.diagnostics {
                    self.diagnostic(now, src, m);
                }
                out.directives
            }
            AclVariant::Kpi => kpi_feedback_decide(ctx, &self.feedback_cfg, &mut self.feedback_state),
            AclVariant::Agent => {
                let table = self.table.as_mut().expect("agent variant has a table");
                let state = table.state_bins.of(ctx);
                if let Some(p) = self.pending.take() {
                    let reward = self.scenario.acl.agent.weights.reward(ctx.kpis.latest(KPI_DEVIATION).unwrap_or(0.0), down, p.cost);
                    self.agent_reward += reward;
                    if !self.header.agent_frozen {
                        learn(table, &Transition { state: p.state, action: p.action, reward, next: state.clone() });
                    }
                }
                let targets = AgentTargets {
                    groups: self.scenario.critical_groups(),
                    cooling_cm: self.scenario.cooling_cm(),
                    cooling_step: self.scenario.acl.agent.cooling_step,
                };
                let (ds, choice) = learning_agent_decide(table, ctx, &targets, &mut self.explore_rng);
                self.pending = Some(PendingTransition { state: choice.state.clone(), action: choice.action, cost: 0.0 });
                self.publish("acl.agent_choice", src, now, Payload::AgentChoice(choice));
                ds
            }
            AclVariant::Advisor => {
                let mut out = rule_engine_decide(&self.rules, ctx);
                for m in out.diagnostics.drain(..) {
                    self.diagnostic(now, src, m);
                }
                let critical = self.scenario.critical_sensors();
                let adv = advisor_decide(&self.advisor, ctx, &self.corpus, &self.steering.registry, &critical);
                for m in adv.diagnostics {
                    self.diagnostic(now, src, m);
                }
                for (p, reason) in adv.rejected {
                    self.publish("advisor.proposal", src, now, Payload::Proposal(p.clone()));
                    self.publish("directive.rejected", src, now, Payload::DirectiveRejected { directive: p.proposed, reason });
                }
                for p in adv.accepted {
                    self.publish("advisor.proposal", src, now, Payload::Proposal(p.clone()));
                    out.directives.push(p.proposed);
                }
                out.directives
            }
            AclVariant::MultiAgent => {
                let out = multi_agent_decide(&self.agents, ctx, &mut self.bus, self.coordinator);
                for m in out.diagnostics {
                    self.diagnostic(now, src, m);
                }
                for (p, reason) in out.losers {
                    self.publish("directive.rejected", src, now, Payload::DirectiveRejected { directive: p.proposed, reason });
                }
                out.directives
            }
        })
    }

    /// Publishes a directive, routes it through steering and applies the
    /// report and side effects.
    fn dispatch(&mut self, d: Directive, source: LayerId, now: SimTime) -> Result<(), SimError> {
        let dseq = self.publish("directive.issued", source, now, Payload::Directive(d.clone()));
        self.incidents.attach(dseq, &[d.target.as_str()]);
        let exec = {
            let mut layers = Layers { plant: &mut self.plant, structural: &mut self.structural, defense: &mut self.defense };
            self.steering.execute_directive(&d, now, &mut layers)
        };
        for ev in exec.events {
            match ev {
                LayerEvent::Structural(e) => self.publish("structural.event", LayerId::Structural, now, Payload::Structural(e)),
                LayerEvent::Defense(e) => self.publish("defense.event", LayerId::RiskSpecificDefense, now, Payload::Defense(e)),
            };
        }
        let report = exec.report;
        if report.directive_id != d.id {
            return Err(self.breach(now, format!("feedback for {} answers {}", report.directive_id, d.id)));
        }
        let fseq = self.publish("directive.feedback", LayerId::IntegrationSteering, now, Payload::Feedback(report.clone()));
        self.incidents.attach(fseq, &[d.target.as_str()]);
        if report.status == FeedbackStatus::Completed && d.kind == DirectiveKind::ActivateCm {
            self.incidents.note_effectiveness(&d.target, report.effectiveness);
        }
        if report.status == FeedbackStatus::Failed {
            if let Some(support) = self.escalator.observe(&format!("failed.{}", d.target), now, fseq) {
                let pattern = LearningPattern {
                    topic: "feedback.failed".into(),
                    target: d.target.clone(),
                    description: format!("repeated failures executing on {}", d.target),
                    support,
                };
                self.trigger(&pattern, now)?;
            }
        }
        self.feedback.push(report);
        for effect in exec.effects {
            match effect {
                SideEffect::BudgetCredit { units } => self.budget += units,
                SideEffect::PriorityShift { category, expires_at } => self.shift = Some(PriorityShift { category, expires_at }),
                SideEffect::ThresholdOverride { kpi, warn, critical, until } => {
                    if let Some(def) = self.kpis.definition(&kpi).cloned() {
                        let mut next = def.clone();
                        next.warn = warn.or(def.warn);
                        next.critical = critical.or(def.critical);
                        if next.check().is_ok() {
                            let base = self.overrides.remove(&kpi).map_or(def, |(b, _)| b);
                            self.overrides.insert(kpi, (base, until));
                            self.kpis.define(next);
                        } else {
                            self.diagnostic(now, LayerId::IntegrationSteering, format!("override on {kpi} rejected"));
                        }
                    }
                }
                SideEffect::LearningRequested { topic, target, description } => {
                    let pattern = LearningPattern { topic, target, description, support: vec![dseq] };
                    self.trigger(&pattern, now)?;
                }
            }
        }
        Ok(())
    }

    fn learning(&mut self, now: SimTime) -> Result<(), SimError> {
        let src = LayerId::AdaptationLearning;
        for e in self.bus.drain(self.al_inbox) {
            let Payload::Incident(rec) = e.payload else { continue };
            if !enabled(&self.header, AlVariant::Review) {
                continue;
            }
            let review = post_incident_review(&rec, self.bus.trace(), &self.scenario.al.review)
                .map_err(|err| self.breach(now, err.to_string()))?;
            let mut reviewed = rec.clone();
            reviewed.root_causes = review.tags;
            self.incidents.update_closed(reviewed.clone());
            self.publish("incident.reviewed", src, now, Payload::Incident(reviewed));
            for p in review.proposals {
                self.propose(p, now);
            }
        }
        let loop_cfg = &self.scenario.al.loop_;
        if enabled(&self.header, AlVariant::Loop) && loop_cfg.period > 0 && now.tick() % loop_cfg.period == 0 {
            let (reports, props) =
                learning_loop(&self.history, SimTime(1), now.plus(1), loop_cfg, self.policy.maintenance.interval_ticks);
            for r in reports {
                self.publish("al.trend", src, now, Payload::Trend(r));
            }
            for p in props {
                self.propose(p, now);
            }
        }
        self.apply_pending(now);
        Ok(())
    }

    fn propose(&mut self, p: AdaptationProposal, now: SimTime) {
        if self.proposals.iter().any(|q| q.id == p.id) {
            return;
        }
        self.publish("al.proposal", LayerId::AdaptationLearning, now, Payload::Adaptation(p.clone()));
        self.proposals.push(p);
    }

    fn apply_pending(&mut self, now: SimTime) {
        if !enabled(&self.header, AlVariant::Policy) {
            return;
        }
        let src = LayerId::AdaptationLearning;
        for i in 0..self.proposals.len() {
            if self.proposals[i].status != ProposalStatus::Pending && self.proposals[i].status != ProposalStatus::Approved {
                continue;
            }
            match apply_policy_update(&self.policy, &self.proposals[i], &self.approval, &self.scenario.al.guards) {
                Ok((doc, applied)) => {
                    let entry = doc.changelog.last().cloned().expect("applied update logs a change");
                    self.policy = doc;
                    self.policies.push(self.policy.clone());
                    self.proposals[i] = applied.clone();
                    self.publish("policy.update", src, now, Payload::PolicyUpdate(entry));
                    self.publish("al.proposal", src, now, Payload::Adaptation(applied));
                    self.push_policy(now);
                }
                Err(PolicyError::AwaitingApproval(_)) => {}
                Err(e) => {
                    self.proposals[i].status = ProposalStatus::Rejected;
                    let p = self.proposals[i].clone();
                    self.diagnostic(now, src, format!("proposal {} rejected: {e}", p.id));
                    self.publish("al.proposal", src, now, Payload::Adaptation(p));
                }
            }
        }
    }

    fn push_policy(&mut self, now: SimTime) {
        match push_updates_to_acl(&self.policy, &mut self.kpis, &mut self.rules) {
            Ok(summary) => {
                for k in summary.thresholds.keys() {
                    self.overrides.remove(k);
                }
                if let Some(w) = self.kpis.definition(KPI_HUMIDITY).and_then(|d| d.warn) {
                    self.advisor.humidity_warn = Some(w);
                }
                self.publish("policy.push", LayerId::AdaptationLearning, now, Payload::PolicyPush(summary));
            }
            Err(e) => self.diagnostic(now, LayerId::AdaptationLearning, format!("policy v{} not pushed: {e}", self.policy.version)),
        }
    }

    /// Fits the humidity model over the whole run, applies any resulting
    /// update and closes the trace.
    fn finish(mut self) -> SimOutput {
        let end = self.plant.state.time;
        if enabled(&self.header, AlVariant::Datafit) {
            let cfg = self.scenario.al.fit.clone();
            let block = cfg.block_ticks.max(1) as usize;
            let mut obs = Vec::new();
            for (b, chunk) in self.humidity_by_tick.chunks(block).enumerate() {
                let lo = (b * block) as u64 + 1;
                let hi = lo + chunk.len() as u64;
                let humidity = chunk.iter().sum::<f64>() / chunk.len() as f64;
                let failed = self.hazard_failures.iter().any(|(t, _, _)| *t >= lo && *t < hi);
                obs.push(Observation { humidity, failed });
            }
            let at_failure: Vec<f64> = self.hazard_failures.iter().map(|(_, h, _)| *h).collect();
            let evidence: Vec<u64> = self.hazard_failures.iter().map(|(_, _, s)| *s).collect();
            let warn = self.policy.thresholds.get(KPI_HUMIDITY).and_then(|t| t.warn);
            let (stats, props) = fit_adaptation_model(&obs, &at_failure, &evidence, warn, &cfg, &format!("fit{:06}.humidity", end.tick()));
            self.fit = stats;
            for p in props {
                self.propose(p, end);
            }
            self.apply_pending(end);
        }
        self.publish("run.finished", LayerId::DataInformationFlow, end, Payload::RunFinished { ticks: end.tick() });
        SimOutput {
            header: self.header,
            trace: self.bus.into_trace(),
            policies: self.policies,
            agent_table: self.table,
            agent_reward: self.agent_reward,
            fit: self.fit,
        }
    }
}

/// Whether a sensor is currently reporting.
pub fn reporting(plant: &Plant, id: &str) -> bool {
    plant.state.sensor(id).is_some_and(|s| s.state == SensorState::Healthy)
}

/// Status level of a KPI in a snapshot, for callers that only hold the trace.
pub fn status_of(snapshot: &KpiSnapshot, kpi: &str) -> ThresholdStatus {
    snapshot.status(kpi)
}

#[allow(dead_code)]
fn availability_kpi() -> &'static str {
    KPI_AVAILABILITY
}
