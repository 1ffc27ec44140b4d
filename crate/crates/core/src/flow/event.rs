use serde::{Deserialize, Serialize};

use crate::acl::{AgentChoice, AgentProposal};
use crate::al::{AdaptationProposal, IncidentRecord, PatchSummary, PolicyChange, TrendReport};
use crate::defense::DefenseEvent;
use crate::model::{Directive, FeedbackReport, KpiSample, LayerId, RiskAssessment, SimTime};
use crate::plant::PlantEvent;
use crate::scenario::RunHeader;
use crate::steering::{AuditReport, LearningPattern};
use crate::structural::StructuralEvent;

use super::kpi::{AnomalyReport, KpiSnapshot};

/// One entry of the trace log. `seq` is assigned by the bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub topic: String,
    pub source: LayerId,
    pub time: SimTime,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum Payload {
    RunStarted(Box<RunHeader>),
    Kpi(KpiSample),
    Snapshot(KpiSnapshot),
    Plant(PlantEvent),
    Risk(RiskAssessment),
    Directive(Directive),
    DirectiveRejected { directive: Directive, reason: String },
    Feedback(FeedbackReport),
    Structural(StructuralEvent),
    Defense(DefenseEvent),
    Anomaly(AnomalyReport),
    LearningTrigger(LearningPattern),
    Proposal(AgentProposal),
    AgentChoice(AgentChoice),
    Incident(IncidentRecord),
    Trend(TrendReport),
    Adaptation(AdaptationProposal),
    PolicyUpdate(PolicyChange),
    PolicyPush(PatchSummary),
    Audit(AuditReport),
    Diagnostic { message: String },
    RunFinished { ticks: u64 },
}
