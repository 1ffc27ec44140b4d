//! Scenario files: plant, roster, countermeasures, KPIs, faults and the
//! strategy settings of a run. Unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acl::agent::{AgentConfig, AgentPolicyTable};
use crate::acl::advisor::AdvisorConfig;
use crate::acl::feedback::KpiFeedbackConfig;
use crate::acl::rules::{check_rules, default_ruleset, risk_id, Rule, RulesetParams, MAINTENANCE, MTTR_KPI};
use crate::acl::{AclVariant, EscalationConfig};
use crate::al::datafit::FitConfig;
use crate::al::policy::{PolicyDocument, PolicyGuards, ThresholdSet};
use crate::al::review::ReviewConfig;
use crate::al::trend::LoopConfig;
use crate::al::AlVariant;
use crate::defense::{CmConfig, Control};
use crate::flow::kpi::{Direction, KpiDefinition, DEFAULT_Z_CRIT};
use crate::model::{Bounds, CmScope, RiskCategory, SimTime, TargetInfo, TargetKind, Registry};
use crate::plant::{
    Criticality, EnvironmentProfile, FaultKind, FaultSpec, GroupConfig, HazardParams, PlantConfig, SensorConfig, SensorRole,
    Series, ENVIRONMENT, KPI_AVAILABILITY, KPI_CPU, KPI_DEVIATION, KPI_HUMIDITY, KPI_TEMPERATURE,
};
use crate::rng::{self, Stream};
use crate::steering::{RiskRule, RiskSource, SteeringConfig};
use crate::structural::ResourceConfig;

/// Trace format version written into every run header.
pub const FORMAT_VERSION: u32 = 1;

/// Faults drawn per seed from the fault stream, identical across strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomFaults {
    /// Injected failures, each on a uniformly chosen critical primary sensor.
    pub sensor_failures: u32,
    pub heat_spikes: u32,
    pub heat_magnitude: f64,
    pub heat_duration: u64,
    /// Faults land uniformly in `[earliest, latest]`.
    pub earliest: u64,
    pub latest: u64,
}

impl Default for RandomFaults {
    fn default() -> Self {
        RandomFaults { sensor_failures: 0, heat_spikes: 0, heat_magnitude: 0.45, heat_duration: 60, earliest: 20, latest: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AclSettings {
    pub budget_per_tick: f64,
    pub budget_cap: f64,
    /// Priority added to directives of a shifted category.
    pub priority_bonus: i64,
    pub risk_trigger: f64,
    pub deviation_trigger: f64,
    /// Cooling is released once the temperature is this far below the setpoint.
    pub release_margin: f64,
    /// Activation cost of bringing a redundant sensor online.
    pub redundancy_cost: f64,
    /// Resource units freed per sample-per-tick of throttled sampling.
    pub sample_cost: f64,
    /// Custom ruleset; the built-in one is derived from the roster otherwise.
    pub rules: Option<Vec<Rule>>,
    pub feedback: FeedbackSettings,
    pub agent: AgentConfig,
    pub advisor: AdvisorConfig,
    pub escalation: EscalationConfig,
    pub seal_floor: f64,
}

impl Default for AclSettings {
    fn default() -> Self {
        AclSettings {
            budget_per_tick: 1.0,
            budget_cap: 5.0,
            priority_bonus: 50,
            risk_trigger: 0.7,
            deviation_trigger: 5.0,
            release_margin: 0.5,
            redundancy_cost: 1.0,
            sample_cost: 0.5,
            rules: None,
            feedback: FeedbackSettings::default(),
            agent: AgentConfig::default(),
            advisor: AdvisorConfig::default(),
            escalation: EscalationConfig::default(),
            seal_floor: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackSettings {
    pub slope_crit: f64,
    pub deviation_floor: f64,
    pub reduce_factor: f64,
}

impl Default for FeedbackSettings {
    fn default() -> Self {
        let d = KpiFeedbackConfig::default();
        FeedbackSettings { slope_crit: d.slope_crit, deviation_floor: d.deviation_floor, reduce_factor: d.reduce_factor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalSetting {
    Manual,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlSettings {
    pub review: ReviewConfig,
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    pub fit: FitConfig,
    pub guards: PolicyGuards,
    pub approval: ApprovalSetting,
}

impl Default for AlSettings {
    fn default() -> Self {
        let mut guards = PolicyGuards::default();
        guards.bounds.insert(KPI_HUMIDITY.into(), Bounds::new(0.5, 1.0));
        guards.bounds.insert(KPI_DEVIATION.into(), Bounds::new(1.0, 15.0));
        AlSettings {
            review: ReviewConfig::default(),
            loop_: LoopConfig::default(),
            fit: FitConfig::default(),
            guards,
            approval: ApprovalSetting::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub ticks: u64,
    pub tick_seconds: f64,
    pub plant: PlantConfig,
    pub environment: EnvironmentProfile,
    pub groups: Vec<GroupConfig>,
    pub sensors: Vec<SensorConfig>,
    pub countermeasures: Vec<CmConfig>,
    pub resources: Vec<ResourceConfig>,
    /// Empty means the built-in definitions.
    pub kpis: Vec<KpiDefinition>,
    pub z_crit: f64,
    pub faults: Vec<FaultSpec>,
    pub random_faults: RandomFaults,
    pub steering: SteeringConfig,
    pub acl: AclSettings,
    pub al: AlSettings,
    /// Starting policy; its thresholds are pushed before the first tick.
    pub policy: Option<PolicyDocument>,
    /// Free-text maintenance records available to the advisor.
    pub corpus: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "unnamed".into(),
            ticks: 500,
            tick_seconds: 60.0,
            plant: PlantConfig::default(),
            environment: EnvironmentProfile::default(),
            groups: Vec::new(),
            sensors: Vec::new(),
            countermeasures: Vec::new(),
            resources: Vec::new(),
            kpis: Vec::new(),
            z_crit: DEFAULT_Z_CRIT,
            faults: Vec::new(),
            random_faults: RandomFaults::default(),
            steering: SteeringConfig::default(),
            acl: AclSettings::default(),
            al: AlSettings::default(),
            policy: None,
            corpus: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

pub const COOLING_CM: &str = "cooling_boost";
pub const HUMIDITY_CM: &str = "dehumidifier";

/// Built-in KPI definitions for the plant's published series.
pub fn default_kpis() -> Vec<KpiDefinition> {
    let def = |id: &str, unit: &str, direction, target, warn, critical| KpiDefinition {
        id: id.into(),
        unit: unit.into(),
        target,
        direction,
        warn,
        critical,
        window: 10,
    };
    vec![
        def(KPI_AVAILABILITY, "fraction", Direction::Below, Some(1.0), Some(1.0), Some(0.95)),
        def(KPI_DEVIATION, "K", Direction::Above, Some(0.0), Some(5.0), Some(8.0)),
        def(KPI_HUMIDITY, "fraction", Direction::Above, None, Some(0.85), Some(0.95)),
        def(MTTR_KPI, "min", Direction::Above, None, Some(10.0), None),
        def(KPI_CPU, "fraction", Direction::Above, None, Some(0.8), Some(0.9)),
        def(KPI_TEMPERATURE, "K", Direction::Above, None, None, None),
    ]
}

fn cooling_cm(delta: f64) -> CmConfig {
    CmConfig {
        id: COOLING_CM.into(),
        scope: CmScope::Specific,
        target_risk: Some(RiskCategory::Physical),
        category: None,
        bounds: BTreeMap::from([("delta".to_string(), Bounds::UNIT)]),
        defaults: BTreeMap::from([("delta".to_string(), delta)]),
        effects: BTreeMap::from([("delta".to_string(), Control::CoolingCapacity)]),
        activation_cost: 1.0,
        priority: 90,
        protects: vec![ENVIRONMENT.into()],
    }
}

fn humidity_cm(delta: f64) -> CmConfig {
    CmConfig {
        id: HUMIDITY_CM.into(),
        scope: CmScope::Specific,
        target_risk: Some(RiskCategory::Physical),
        category: None,
        bounds: BTreeMap::from([("delta".to_string(), Bounds::new(-0.5, 0.0))]),
        defaults: BTreeMap::from([("delta".to_string(), delta)]),
        effects: BTreeMap::from([("delta".to_string(), Control::Humidity)]),
        activation_cost: 1.0,
        priority: 60,
        protects: Vec::new(),
    }
}

fn sensor(id: &str, group: &str, role: SensorRole, criticality: Criticality, base_hazard: f64) -> SensorConfig {
    SensorConfig {
        id: id.into(),
        group: group.into(),
        role,
        criticality,
        sampling_rate: 1.0,
        base_hazard,
        seal_integrity: 1.0,
        age_ticks: 0,
    }
}

impl Scenario {
    /// The reference plant: two temperature groups with one primary and two
    /// redundant critical sensors each, two auxiliary probes, seasonal
    /// humidity, and one injected sensor failure plus one heat spike per seed.
    pub fn reference() -> Scenario {
        let mut sensors = Vec::new();
        for g in ["temp_a", "temp_b"] {
            let p = &g[5..];
            sensors.push(sensor(&format!("t{p}1"), g, SensorRole::Primary, Criticality::Critical, 0.002));
            sensors.push(sensor(&format!("t{p}2"), g, SensorRole::Redundant, Criticality::Critical, 0.002));
            sensors.push(sensor(&format!("t{p}3"), g, SensorRole::Redundant, Criticality::Critical, 0.002));
        }
        sensors.push(sensor("aux1", "aux", SensorRole::Primary, Criticality::NonCritical, 0.001));
        sensors.push(sensor("aux2", "aux", SensorRole::Primary, Criticality::NonCritical, 0.001));
        Scenario {
            name: "reference".into(),
            plant: PlantConfig { hazard: HazardParams { k_h: 3.0, ..HazardParams::default() }, ..PlantConfig::default() },
            environment: EnvironmentProfile {
                humidity: Series(vec![(0, 0.45), (100, 0.7), (170, 0.92), (210, 0.92), (250, 0.45)]),
                ambient_heat: Series::constant(0.0),
                seasonal_period: Some(250),
            },
            groups: vec![
                GroupConfig { id: "temp_a".into(), required: 1 },
                GroupConfig { id: "temp_b".into(), required: 1 },
                GroupConfig { id: "aux".into(), required: 0 },
            ],
            sensors,
            countermeasures: vec![cooling_cm(0.3), humidity_cm(-0.3)],
            resources: vec![ResourceConfig {
                id: "redundant_node".into(),
                lead_time: 2,
                compute_capacity: 0.5,
                activation_cost: 2.0,
                online: false,
            }],
            random_faults: RandomFaults { sensor_failures: 1, heat_spikes: 1, ..RandomFaults::default() },
            ..Scenario::default()
        }
    }

    /// The reference plant through four humid seasons with a short
    /// saturation peak, sensors far more sensitive to humidity, and no heat
    /// spikes. The humidity warn level starts above the peak, so the
    /// dehumidifier only reacts once the peak is reached.
    pub fn humid_season() -> Scenario {
        let mut s = Scenario::reference();
        s.name = "humid-season".into();
        s.ticks = 1000;
        s.plant.hazard.k_h = 300.0;
        s.environment.humidity = Series(vec![(0, 0.45), (100, 0.7), (170, 0.92), (185, 0.97), (200, 0.92), (250, 0.45)]);
        for x in s.sensors.iter_mut().filter(|x| x.criticality == Criticality::Critical) {
            x.base_hazard = 0.0001;
        }
        s.random_faults.heat_spikes = 0;
        s.kpis = default_kpis();
        for k in s.kpis.iter_mut().filter(|k| k.id == KPI_HUMIDITY) {
            k.warn = Some(0.95);
            k.critical = Some(0.99);
        }
        s
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        match name {
            "reference" => Some(Scenario::reference()),
            "humid-season" => Some(Scenario::humid_season()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn kpi_definitions(&self) -> Vec<KpiDefinition> {
        if self.kpis.is_empty() {
            default_kpis()
        } else {
            self.kpis.clone()
        }
    }

    fn cm(&self, id: &str) -> Option<&CmConfig> {
        self.countermeasures.iter().find(|c| c.id == id)
    }

    pub fn cooling_cm(&self) -> Option<String> {
        self.cm(COOLING_CM).map(|c| c.id.clone())
    }

    pub fn humidity_cm(&self) -> Option<String> {
        self.cm(HUMIDITY_CM).map(|c| c.id.clone())
    }

    /// Groups that have critical sensors.
    pub fn critical_groups(&self) -> Vec<String> {
        self.groups
            .iter()
            .filter(|g| self.sensors.iter().any(|s| s.group == g.id && s.criticality == Criticality::Critical))
            .map(|g| g.id.clone())
            .collect()
    }

    pub fn critical_sensors(&self) -> BTreeSet<String> {
        self.sensors.iter().filter(|s| s.criticality == Criticality::Critical).map(|s| s.id.clone()).collect()
    }

    pub fn noncritical_sensors(&self) -> Vec<String> {
        self.sensors.iter().filter(|s| s.criticality == Criticality::NonCritical).map(|s| s.id.clone()).collect()
    }

    pub fn release_temperature(&self) -> f64 {
        self.plant.setpoint - self.acl.release_margin
    }

    /// Configured risk rules, or one hazard rule per critical group.
    pub fn risk_rules(&self) -> Vec<RiskRule> {
        if !self.steering.risk_rules.is_empty() {
            return self.steering.risk_rules.clone();
        }
        self.critical_groups()
            .into_iter()
            .map(|g| RiskRule {
                id: risk_id(&g),
                category: RiskCategory::Physical,
                horizon_ticks: 1,
                source: RiskSource::SensorHazard {
                    sensors: self
                        .sensors
                        .iter()
                        .filter(|s| s.group == g && s.criticality == Criticality::Critical)
                        .map(|s| s.id.clone())
                        .collect(),
                },
            })
            .collect()
    }

    pub fn ruleset_params(&self) -> RulesetParams {
        RulesetParams {
            groups: self.critical_groups(),
            cooling_cm: self.cooling_cm(),
            humidity_cm: self.humidity_cm(),
            risk_trigger: self.acl.risk_trigger,
            deviation_trigger: self.acl.deviation_trigger,
            release_temperature: self.release_temperature(),
        }
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.acl.rules.clone().unwrap_or_else(|| default_ruleset(&self.ruleset_params()))
    }

    pub fn feedback_config(&self) -> KpiFeedbackConfig {
        KpiFeedbackConfig {
            slope_crit: self.acl.feedback.slope_crit,
            deviation_floor: self.acl.feedback.deviation_floor,
            reduce_factor: self.acl.feedback.reduce_factor,
            cooling_cm: self.cooling_cm(),
            humidity_cm: self.humidity_cm(),
            release_temperature: self.release_temperature(),
            noncritical: self.noncritical_sensors(),
            groups: self.critical_groups(),
        }
    }

    /// Every addressable id with its kind, bounds, cost and category.
    pub fn registry(&self) -> Registry {
        let mut r = Registry::default();
        let physical = Some(RiskCategory::Physical);
        let sensor_bounds = BTreeMap::from([("factor".to_string(), Bounds::UNIT), ("seal_check".to_string(), Bounds::UNIT)]);
        for g in &self.groups {
            let members = self.sensors.iter().filter(|s| s.group == g.id).map(|s| s.id.clone()).collect();
            r.insert(
                g.id.clone(),
                TargetInfo {
                    kind: TargetKind::SensorGroup { members },
                    bounds: BTreeMap::from([("seal_check".to_string(), Bounds::UNIT)]),
                    activation_cost: self.acl.redundancy_cost,
                    category: physical,
                },
            );
        }
        for s in &self.sensors {
            r.insert(
                s.id.clone(),
                TargetInfo { bounds: sensor_bounds.clone(), category: physical, ..TargetInfo::of(TargetKind::Sensor) },
            );
        }
        for c in &self.countermeasures {
            r.insert(
                c.id.clone(),
                TargetInfo {
                    kind: TargetKind::Countermeasure,
                    bounds: c.bounds.clone(),
                    activation_cost: c.activation_cost,
                    category: Some(c.category()),
                },
            );
        }
        for res in &self.resources {
            r.insert(
                res.id.clone(),
                TargetInfo { activation_cost: res.activation_cost, category: physical, ..TargetInfo::of(TargetKind::Resource) },
            );
        }
        let wide = Bounds::new(-1e9, 1e9);
        for k in self.kpi_definitions() {
            r.insert(
                k.id.clone(),
                TargetInfo {
                    bounds: BTreeMap::from([("warn".to_string(), wide), ("critical".to_string(), wide)]),
                    ..TargetInfo::of(TargetKind::Kpi)
                },
            );
        }
        r.insert(
            MAINTENANCE,
            TargetInfo {
                bounds: BTreeMap::from([("seal_check".to_string(), Bounds::UNIT)]),
                category: Some(RiskCategory::Organisational),
                ..TargetInfo::of(TargetKind::Maintenance)
            },
        );
        for c in [RiskCategory::Cyber, RiskCategory::Physical, RiskCategory::Organisational] {
            r.insert(c.token(), TargetInfo::of(TargetKind::Category));
        }
        r.insert("al", TargetInfo::of(TargetKind::Learning));
        r
    }

    /// The given starting policy, or version 0 seeded from the KPI thresholds.
    pub fn initial_policy(&self) -> PolicyDocument {
        if let Some(p) = &self.policy {
            return p.clone();
        }
        let mut doc = PolicyDocument::default();
        for k in self.kpi_definitions() {
            if k.warn.is_some() || k.critical.is_some() {
                doc.thresholds.insert(k.id.clone(), ThresholdSet { warn: k.warn, critical: k.critical });
            }
        }
        doc
    }

    /// Scheduled faults plus the per-seed random ones, sorted by tick.
    /// Draws only from the fault stream.
    pub fn fault_schedule(&self, seed: u64) -> Vec<FaultSpec> {
        let mut out = self.faults.clone();
        let rf = &self.random_faults;
        let mut rng = rng::stream(seed, Stream::Faults);
        let primaries: Vec<&SensorConfig> = self
            .sensors
            .iter()
            .filter(|s| s.criticality == Criticality::Critical && s.role == SensorRole::Primary)
            .collect();
        let (lo, hi) = (rf.earliest.max(1), rf.latest.max(rf.earliest.max(1)));
        for _ in 0..rf.sensor_failures {
            let at: u64 = rng.gen_range(lo..=hi);
            let target = primaries.choose(&mut rng).map(|s| s.id.clone());
            if let Some(target) = target {
                out.push(FaultSpec {
                    kind: FaultKind::SensorFail,
                    target,
                    at_tick: SimTime(at),
                    magnitude: 1.0,
                    duration: None,
                    level: None,
                });
            }
        }
        for _ in 0..rf.heat_spikes {
            let at: u64 = rng.gen_range(lo..=hi);
            out.push(FaultSpec {
                kind: FaultKind::HeatSpike,
                target: ENVIRONMENT.into(),
                at_tick: SimTime(at),
                magnitude: rf.heat_magnitude,
                duration: Some(rf.heat_duration),
                level: None,
            });
        }
        out.sort_by_key(|f| f.at_tick);
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.tick_seconds > 0.0) {
            return bad("tick_seconds must be positive".into());
        }
        self.environment.check().map_err(ScenarioError::Invalid)?;
        let mut ids = BTreeSet::new();
        let groups: BTreeSet<&str> = self.groups.iter().map(|g| g.id.as_str()).collect();
        for s in &self.sensors {
            if !ids.insert(s.id.as_str()) {
                return bad(format!("duplicate sensor id {}", s.id));
            }
            if !groups.contains(s.group.as_str()) {
                return bad(format!("sensor {} in unknown group {}", s.id, s.group));
            }
            if !(s.sampling_rate > 0.0) {
                return bad(format!("sensor {}: sampling_rate must be positive", s.id));
            }
            for (name, v) in [("base_hazard", s.base_hazard), ("seal_integrity", s.seal_integrity)] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("sensor {}: {name} must lie in [0, 1]", s.id));
                }
            }
        }
        for c in &self.countermeasures {
            c.check().map_err(ScenarioError::Invalid)?;
        }
        for k in self.kpi_definitions() {
            k.check().map_err(ScenarioError::Invalid)?;
        }
        for f in &self.faults {
            if f.at_tick.tick() > self.ticks {
                return bad(format!("fault at {} beyond horizon {}", f.at_tick, self.ticks));
            }
        }
        if self.acl.budget_per_tick < 0.0 || self.acl.budget_cap < 0.0 {
            return bad("budgets must be non-negative".into());
        }
        self.acl.agent.table().check().map_err(ScenarioError::Invalid)?;
        let registry = self.registry();
        let kpis: BTreeSet<String> = self.kpi_definitions().into_iter().map(|k| k.id).collect();
        let risks: BTreeSet<String> = self.risk_rules().into_iter().map(|r| r.id).collect();
        check_rules(&self.rules(), &registry, |var| known_var(var, &kpis, &risks, &self.sensors, &self.groups))
            .map_err(ScenarioError::Invalid)
    }
}

/// Whether a rule variable names something this scenario produces.
fn known_var(var: &str, kpis: &BTreeSet<String>, risks: &BTreeSet<String>, sensors: &[SensorConfig], groups: &[GroupConfig]) -> bool {
    if var == "budget" || kpis.contains(var) {
        return true;
    }
    if let Some(r) = var.strip_prefix("risk.") {
        return risks.contains(r);
    }
    for prefix in ["status.", "avg.", "slope."] {
        if let Some(k) = var.strip_prefix(prefix) {
            return known_var(k, kpis, risks, sensors, groups);
        }
    }
    if var.starts_with("cm.") && var.ends_with(".active") {
        return true;
    }
    for s in sensors {
        if var == format!("hazard.{}", s.id) || var == format!("reading.{}", s.id) {
            return true;
        }
    }
    for g in groups {
        if var == format!("group.{}.spare", g.id) || var == format!("group.{}.standby", g.id) {
            return true;
        }
    }
    matches!(var, "failed_sensors" | "repair_backlog")
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format_version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub acl: AclVariant,
    pub al: BTreeSet<AlVariant>,
    pub ticks: u64,
    #[serde(default)]
    pub approvals: BTreeSet<String>,
    /// Pre-trained table for the learning agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_table: Option<AgentPolicyTable>,
    /// Evaluate the agent's table without updating it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub agent_frozen: bool,
}

impl RunHeader {
    pub fn new(scenario: Scenario, seed: u64, acl: AclVariant, al: BTreeSet<AlVariant>) -> Self {
        let ticks = scenario.ticks;
        RunHeader { format_version: FORMAT_VERSION, scenario, seed, acl, al, ticks, approvals: BTreeSet::new(), agent_table: None, agent_frozen: false }
    }
}
