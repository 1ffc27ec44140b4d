//! Shared vocabulary for every layer: identities, countermeasures, risk
//! assessments and the two cross-layer messages (directives flowing down,
//! feedback reports flowing up).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Discrete simulation time. Serialized as the bare tick count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn tick(self) -> u64 {
        self.0
    }

    pub fn plus(self, ticks: u64) -> SimTime {
        SimTime(self.0 + ticks)
    }

    /// Ticks elapsed since `earlier`, saturating at zero.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Converts a tick count into minutes of simulated wall-clock time.
pub fn ticks_to_minutes(ticks: u64, tick_seconds: f64) -> f64 {
    ticks as f64 * tick_seconds / 60.0
}

/// One timestamped metric observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub kpi: String,
    pub time: SimTime,
    pub value: f64,
}

impl KpiSample {
    pub fn new(kpi: impl Into<String>, time: SimTime, value: f64) -> Self {
        KpiSample { kpi: kpi.into(), time, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerId {
    AdaptiveCoordination,
    IntegrationSteering,
    AdaptationLearning,
    RiskSpecificDefense,
    Structural,
    DataInformationFlow,
}

impl LayerId {
    pub const ALL: [LayerId; 6] = [
        LayerId::AdaptiveCoordination,
        LayerId::IntegrationSteering,
        LayerId::AdaptationLearning,
        LayerId::RiskSpecificDefense,
        LayerId::Structural,
        LayerId::DataInformationFlow,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResilienceGoal {
    Anticipation,
    Resistance,
    Recovery,
    ErrorAnalysis,
    Adaptation,
}

impl ResilienceGoal {
    pub const ALL: [ResilienceGoal; 5] = [
        ResilienceGoal::Anticipation,
        ResilienceGoal::Resistance,
        ResilienceGoal::Recovery,
        ResilienceGoal::ErrorAnalysis,
        ResilienceGoal::Adaptation,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCategory {
    Cyber,
    Physical,
    Organisational,
}

impl RiskCategory {
    pub fn parse(token: &str) -> Option<RiskCategory> {
        match token {
            "cyber" => Some(RiskCategory::Cyber),
            "physical" => Some(RiskCategory::Physical),
            "organisational" => Some(RiskCategory::Organisational),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            RiskCategory::Cyber => "cyber",
            RiskCategory::Physical => "physical",
            RiskCategory::Organisational => "organisational",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmScope {
    Universal,
    Specific,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmState {
    Inactive,
    Activating,
    Active,
    Degraded,
}

impl CmState {
    /// Allowed lifecycle edges. `Activating -> Inactive` is a cancellation.
    pub fn can_transition(self, to: CmState) -> bool {
        use CmState::*;
        matches!(
            (self, to),
            (Inactive, Activating)
                | (Activating, Active)
                | (Activating, Inactive)
                | (Active, Degraded)
                | (Active, Inactive)
                | (Degraded, Active)
                | (Degraded, Inactive)
        )
    }

    pub fn is_engaged(self) -> bool {
        matches!(self, CmState::Active | CmState::Degraded)
    }
}

/// Closed interval a numeric parameter must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const UNIT: Bounds = Bounds { min: 0.0, max: 1.0 };

    pub fn new(min: f64, max: f64) -> Self {
        Bounds { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Countermeasure {
    pub id: String,
    pub scope: CmScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_risk: Option<RiskCategory>,
    pub state: CmState,
    pub parameters: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, Bounds>,
    pub activation_cost: f64,
    pub priority: i64,
}

impl Countermeasure {
    /// Checks the scope/risk pairing and that every parameter has bounds and lies within them.
    pub fn check(&self) -> Result<(), String> {
        match (self.scope, self.target_risk) {
            (CmScope::Universal, Some(_)) => {
                return Err(format!("{}: universal countermeasure cannot target a risk", self.id))
            }
            (CmScope::Specific, None) => {
                return Err(format!("{}: specific countermeasure needs a target risk", self.id))
            }
            _ => {}
        }
        if !(self.activation_cost >= 0.0) {
            return Err(format!("{}: negative activation cost", self.id));
        }
        check_params(&self.parameters, &self.bounds).map_err(|e| format!("{}: {e}", self.id))
    }

    pub fn transition(&mut self, to: CmState) -> Result<(), String> {
        if self.state == to {
            return Ok(());
        }
        if !self.state.can_transition(to) {
            return Err(format!("{}: illegal transition {:?} -> {:?}", self.id, self.state, to));
        }
        self.state = to;
        Ok(())
    }
}

pub(crate) fn check_params(
    params: &BTreeMap<String, f64>,
    bounds: &BTreeMap<String, Bounds>,
) -> Result<(), String> {
    for (name, value) in params {
        match bounds.get(name) {
            None => return Err(format!("parameter {name} has no declared bounds")),
            Some(b) if !b.contains(*value) => {
                return Err(format!(
                    "parameter {name}={value} out of bounds [{}, {}]",
                    b.min, b.max
                ))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub risk_id: String,
    pub category: RiskCategory,
    pub probability: f64,
    pub affected_components: BTreeSet<String>,
    pub horizon_ticks: u64,
    pub issued_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveKind {
    #[serde(rename = "activate_cm")]
    ActivateCm,
    #[serde(rename = "deactivate_cm")]
    DeactivateCm,
    StrengthenBaseline,
    AdjustParameter,
    Reprioritize,
    TriggerLearning,
    NotifyMaintenance,
    ReduceSampling,
}

/// A top-down command. Sorting uses [`directive_order`]: priority
/// descending, then id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub id: String,
    pub kind: DirectiveKind,
    pub target: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub priority: i64,
    pub issued_by: LayerId,
    pub issued_at: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<SimTime>,
}

impl Directive {
    pub fn new(id: impl Into<String>, kind: DirectiveKind, target: impl Into<String>) -> Self {
        Directive {
            id: id.into(),
            kind,
            target: target.into(),
            parameters: BTreeMap::new(),
            priority: 0,
            issued_by: LayerId::AdaptiveCoordination,
            issued_at: SimTime::ZERO,
            expires_at: None,
        }
    }

    pub fn with_priority(mut self, priority: i64) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.parameters.insert(name.into(), value);
        self
    }

    pub fn issued(mut self, by: LayerId, at: SimTime) -> Self {
        self.issued_by = by;
        self.issued_at = at;
        self
    }

    pub fn expiring(mut self, at: SimTime) -> Self {
        self.expires_at = Some(at);
        self
    }

    pub fn is_expired(&self, now: SimTime) -> bool {
        self.expires_at.is_some_and(|e| e < now)
    }
}

pub fn directive_order(a: &Directive, b: &Directive) -> Ordering {
    b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id))
}

pub fn sort_directives(ds: &mut [Directive]) {
    ds.sort_by(directive_order);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackStatus {
    Completed,
    Failed,
    Expired,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub directive_id: String,
    pub status: FeedbackStatus,
    pub effectiveness: f64,
    pub completed_at: SimTime,
    pub detail: String,
}

impl FeedbackReport {
    /// Builds a report, clamping effectiveness to [0, 1] and forcing it to
    /// zero for anything but `Completed`.
    pub fn new(
        directive_id: impl Into<String>,
        status: FeedbackStatus,
        effectiveness: f64,
        at: SimTime,
        detail: impl Into<String>,
    ) -> Self {
        let effectiveness = match status {
            FeedbackStatus::Completed => clamp_unit(effectiveness),
            _ => 0.0,
        };
        FeedbackReport {
            directive_id: directive_id.into(),
            status,
            effectiveness,
            completed_at: at,
            detail: detail.into(),
        }
    }

    pub fn completed(id: &str, effectiveness: f64, at: SimTime, detail: impl Into<String>) -> Self {
        Self::new(id, FeedbackStatus::Completed, effectiveness, at, detail)
    }

    pub fn failed(id: &str, at: SimTime, detail: impl Into<String>) -> Self {
        Self::new(id, FeedbackStatus::Failed, 0.0, at, detail)
    }

    pub fn rejected(id: &str, at: SimTime, detail: impl Into<String>) -> Self {
        Self::new(id, FeedbackStatus::Rejected, 0.0, at, detail)
    }
}

/// Realized over predicted reduction, clamped to [0, 1]. A zero prediction
/// yields zero.
pub fn effectiveness(realized: f64, predicted: f64) -> f64 {
    if predicted <= 0.0 || !predicted.is_finite() {
        0.0
    } else {
        clamp_unit(realized / predicted)
    }
}

pub fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// What a registry id refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    SensorGroup { members: Vec<String> },
    Sensor,
    Countermeasure,
    Resource,
    Kpi,
    Maintenance,
    Category,
    Learning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetInfo {
    #[serde(flatten)]
    pub kind: TargetKind,
    #[serde(default)]
    pub bounds: BTreeMap<String, Bounds>,
    #[serde(default)]
    pub activation_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<RiskCategory>,
}

impl TargetInfo {
    pub fn of(kind: TargetKind) -> Self {
        TargetInfo { kind, bounds: BTreeMap::new(), activation_cost: 0.0, category: None }
    }
}

/// Every addressable id in a run with its kind, parameter bounds, cost and risk category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub targets: BTreeMap<String, TargetInfo>,
}

impl Registry {
    pub fn insert(&mut self, id: impl Into<String>, info: TargetInfo) {
        self.targets.insert(id.into(), info);
    }

    pub fn get(&self, id: &str) -> Option<&TargetInfo> {
        self.targets.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.targets.contains_key(id)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn cost(&self, d: &Directive) -> f64 {
        match d.kind {
            DirectiveKind::ActivateCm | DirectiveKind::StrengthenBaseline => {
                self.get(&d.target).map_or(0.0, |t| t.activation_cost)
            }
            _ => 0.0,
        }
    }

    pub fn category(&self, d: &Directive) -> Option<RiskCategory> {
        self.get(&d.target).and_then(|t| t.category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Total check of a directive against the registry.
pub fn validate_directive(d: &Directive, registry: &Registry) -> Validity {
    use DirectiveKind::*;
    if d.kind == Reprioritize && d.expires_at.is_none() {
        return Validity::Invalid("missing expiry".into());
    }
    let Some(info) = registry.get(&d.target) else {
        return Validity::Invalid("unknown target".into());
    };
    let kind_ok = match (d.kind, &info.kind) {
        (ActivateCm, TargetKind::SensorGroup { .. } | TargetKind::Countermeasure) => true,
        (DeactivateCm, TargetKind::Countermeasure) => true,
        (StrengthenBaseline, TargetKind::Resource) => true,
        (AdjustParameter, TargetKind::Countermeasure | TargetKind::Kpi) => true,
        (Reprioritize, TargetKind::Category) => true,
        (TriggerLearning, TargetKind::Learning) => true,
        (NotifyMaintenance, TargetKind::Maintenance | TargetKind::Sensor | TargetKind::SensorGroup { .. }) => true,
        (ReduceSampling, TargetKind::Sensor) => true,
        _ => false,
    };
    if !kind_ok {
        return Validity::Invalid(format!("{:?} cannot target {}", d.kind, d.target));
    }
    if let Err(e) = check_params(&d.parameters, &info.bounds) {
        return Validity::Invalid(format!("parameter out of bounds: {e}"));
    }
    Validity::Valid
}
