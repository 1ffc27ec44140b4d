//! Deterministic thermal plant with humidity-driven sensor hazards,
//! sensor redundancy and fault injection.
//!
//! One call to [`Plant::step`] advances one tick:
//!
//! ```text
//! T' = T + heat - kappa * cooling * (T - T_ambient) + N(0, sigma_T)
//! ```
//!
//! Every tick draws the same number of random values regardless of sensor
//! states, so two runs that share a seed but differ in control decisions
//! still see aligned noise and failure draws.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{KpiSample, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorRole {
    Primary,
    Redundant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Critical,
    NonCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorState {
    Healthy,
    Failed,
    Standby,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorUnit {
    pub id: String,
    pub group: String,
    pub role: SensorRole,
    pub criticality: Criticality,
    pub sampling_rate: f64,
    pub state: SensorState,
    pub base_hazard: f64,
    pub age_ticks: u64,
    pub seal_integrity: f64,
    /// Fractional sample accumulator; a reading is emitted each time it reaches 1.
    pub sample_phase: f64,
}

impl SensorUnit {
    pub fn is_critical(&self) -> bool {
        self.criticality == Criticality::Critical
    }
}

/// Roster entry in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub id: String,
    pub group: String,
    pub role: SensorRole,
    pub criticality: Criticality,
    #[serde(default = "one")]
    pub sampling_rate: f64,
    #[serde(default)]
    pub base_hazard: f64,
    #[serde(default = "one")]
    pub seal_integrity: f64,
    #[serde(default)]
    pub age_ticks: u64,
}

fn one() -> f64 {
    1.0
}

impl SensorConfig {
    pub fn unit(&self) -> SensorUnit {
        SensorUnit {
            id: self.id.clone(),
            group: self.group.clone(),
            role: self.role,
            criticality: self.criticality,
            sampling_rate: self.sampling_rate,
            state: match self.role {
                SensorRole::Primary => SensorState::Healthy,
                SensorRole::Redundant => SensorState::Standby,
            },
            base_hazard: self.base_hazard,
            age_ticks: self.age_ticks,
            seal_integrity: self.seal_integrity,
            sample_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub id: String,
    /// Healthy critical sensors the group needs for full coverage.
    pub required: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardParams {
    pub k_h: f64,
    pub h_crit: f64,
    pub k_a: f64,
    pub age_scale: f64,
}

impl Default for HazardParams {
    fn default() -> Self {
        HazardParams { k_h: 1.5, h_crit: 0.6, k_a: 1.0, age_scale: 1000.0 }
    }
}

/// Per-tick failure probability of a sensor.
///
/// `base * (1 + k_h * max(0, h - h_crit) / (1 - h_crit)) * (1 + k_a * age / A) * (2 - seal)`,
/// clamped to [0, 1].
pub fn failure_probability(s: &SensorUnit, humidity: f64, hp: &HazardParams) -> f64 {
    let humid = if hp.h_crit < 1.0 {
        (humidity - hp.h_crit).max(0.0) / (1.0 - hp.h_crit)
    } else {
        0.0
    };
    let age = if hp.age_scale > 0.0 { s.age_ticks as f64 / hp.age_scale } else { 0.0 };
    let p = s.base_hazard * (1.0 + hp.k_h * humid) * (1.0 + hp.k_a * age) * (2.0 - s.seal_integrity);
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    pub base_load: f64,
    pub load_per_sample: f64,
    pub capacity: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig { base_load: 0.5, load_per_sample: 0.05, capacity: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub t_ambient: f64,
    pub setpoint: f64,
    pub initial_temperature: Option<f64>,
    pub kappa: f64,
    pub heat_input: f64,
    pub cooling_capacity: f64,
    pub sigma_t: f64,
    pub sigma_s: f64,
    /// Deviation above which the thermal function counts as down.
    pub deviation_critical: f64,
    pub hazard: HazardParams,
    /// Seal wear per tick at saturated humidity; scales linearly above `h_crit`.
    pub seal_wear: f64,
    pub repair_ticks: u64,
    pub expedited_repair_ticks: u64,
    pub compute: ComputeConfig,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            t_ambient: 293.15,
            setpoint: 300.15,
            initial_temperature: None,
            kappa: 0.1,
            heat_input: 0.35,
            cooling_capacity: 0.5,
            sigma_t: 0.05,
            sigma_s: 0.2,
            deviation_critical: 8.0,
            hazard: HazardParams::default(),
            seal_wear: 0.002,
            repair_ticks: 40,
            expedited_repair_ticks: 10,
            compute: ComputeConfig::default(),
        }
    }
}

/// Piecewise-linear series given by `(tick, value)` control points,
/// held constant outside the first and last point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Series(pub Vec<(u64, f64)>);

impl Series {
    pub fn constant(v: f64) -> Self {
        Series(vec![(0, v)])
    }

    pub fn at(&self, tick: u64) -> f64 {
        let pts = &self.0;
        match pts.len() {
            0 => 0.0,
            _ if tick <= pts[0].0 => pts[0].1,
            _ => {
                for w in pts.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if tick <= t1 {
                        if t1 == t0 {
                            return v1;
                        }
                        let f = (tick - t0) as f64 / (t1 - t0) as f64;
                        return v0 + f * (v1 - v0);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }

    fn check(&self, name: &str, unit: bool) -> Result<(), String> {
        if self.0.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(format!("{name}: control points must be ordered by tick"));
        }
        if self.0.iter().any(|(_, v)| !v.is_finite()) {
            return Err(format!("{name}: non-finite value"));
        }
        if unit && self.0.iter().any(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(format!("{name}: values must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentProfile {
    pub humidity: Series,
    pub ambient_heat: Series,
    /// When set, both series are evaluated at `tick % period`.
    pub seasonal_period: Option<u64>,
}

impl Default for EnvironmentProfile {
    fn default() -> Self {
        EnvironmentProfile {
            humidity: Series::constant(0.5),
            ambient_heat: Series::constant(0.0),
            seasonal_period: None,
        }
    }
}

impl EnvironmentProfile {
    fn phase(&self, tick: u64) -> u64 {
        match self.seasonal_period {
            Some(p) if p > 0 => tick % p,
            _ => tick,
        }
    }

    pub fn humidity_at(&self, tick: u64) -> f64 {
        self.humidity.at(self.phase(tick)).clamp(0.0, 1.0)
    }

    pub fn heat_at(&self, tick: u64) -> f64 {
        self.ambient_heat.at(self.phase(tick))
    }

    pub fn check(&self) -> Result<(), String> {
        if self.seasonal_period == Some(0) {
            return Err("environment.seasonal_period must be positive".into());
        }
        self.humidity.check("environment.humidity", true)?;
        self.ambient_heat.check("environment.ambient_heat", false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    SensorFail,
    SealDegrade,
    HeatSpike,
    HumiditySurge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: String,
    pub at_tick: SimTime,
    pub magnitude: f64,
    /// Heat spikes last this many ticks; absent means for the rest of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<u64>,
    /// Humidity level a surge holds; defaults to [`DEFAULT_SURGE_LEVEL`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

pub const DEFAULT_SURGE_LEVEL: f64 = 0.95;
pub const ENVIRONMENT: &str = "environment";

/// Additive control deltas contributed by engaged countermeasures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub cooling_delta: f64,
    pub heat_delta: f64,
    pub humidity_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Hazard,
    Injected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFailure {
    pub sensor: String,
    pub group: String,
    pub critical: bool,
    pub humidity: f64,
    pub seal_integrity: f64,
    pub age_ticks: u64,
    pub cause: FailureCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PlantEvent {
    FaultApplied { fault: FaultSpec },
    FaultRejected { fault: FaultSpec, reason: String },
    SensorFailed(SensorFailure),
    SensorRepaired { sensor: String, group: String },
    Status { up: BTreeMap<String, bool> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub samples: Vec<KpiSample>,
    pub events: Vec<PlantEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub temperature: f64,
    pub setpoint: f64,
    /// Base heat input plus permanent heat faults.
    pub heat_input: f64,
    pub cooling_capacity: f64,
    /// Effective humidity at the sensors this tick.
    pub humidity: f64,
    /// Ambient humidity before countermeasure deltas.
    pub ambient_humidity: f64,
    pub sensors: Vec<SensorUnit>,
    pub time: SimTime,
    pub compute_capacity: f64,
    heat_spikes: Vec<(u64, f64)>,
    humidity_override: Option<(u64, f64)>,
    repairs: BTreeMap<String, (u64, SensorState)>,
}

impl PlantState {
    pub fn sensor(&self, id: &str) -> Option<&SensorUnit> {
        self.sensors.iter().find(|s| s.id == id)
    }

    pub fn sensor_mut(&mut self, id: &str) -> Option<&mut SensorUnit> {
        self.sensors.iter_mut().find(|s| s.id == id)
    }

    pub fn deviation(&self) -> f64 {
        (self.temperature - self.setpoint).abs()
    }

    pub fn pending_repair(&self, id: &str) -> Option<u64> {
        self.repairs.get(id).map(|(due, _)| *due)
    }

    /// Pulls every pending repair forward to at most `due`. Returns the
    /// total number of ticks saved.
    pub fn expedite_repairs(&mut self, sensors: &BTreeSet<String>, due: u64) -> u64 {
        let mut saved = 0;
        for (id, (when, _)) in self.repairs.iter_mut() {
            if sensors.contains(id) && *when > due {
                saved += *when - due;
                *when = due;
            }
        }
        saved
    }

    /// Preventive service: reseals a healthy sensor whose seal is below
    /// `seal_floor`. Returns whether anything changed.
    pub fn service_sensor(&mut self, id: &str, seal_floor: f64) -> bool {
        match self.sensor_mut(id) {
            Some(s) if s.state == SensorState::Healthy && s.seal_integrity < seal_floor => {
                s.seal_integrity = 1.0;
                true
            }
            _ => false,
        }
    }

    pub fn failed_sensors(&self) -> BTreeSet<String> {
        self.sensors.iter().filter(|s| s.state == SensorState::Failed).map(|s| s.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FaultError {
    #[error("unknown fault target {0}")]
    UnknownTarget(String),
    #[error("fault {0:?} cannot target the environment")]
    NeedsSensor(FaultKind),
    #[error("magnitude {0} out of range")]
    Magnitude(f64),
}

/// Applies a fault to the state. Sensor faults need a known sensor id;
/// heat and humidity faults target `"environment"`.
pub fn inject_fault(state: &mut PlantState, f: &FaultSpec) -> Result<(), FaultError> {
    let now = state.time.tick();
    match f.kind {
        FaultKind::SensorFail | FaultKind::SealDegrade => {
            if f.target == ENVIRONMENT {
                return Err(FaultError::NeedsSensor(f.kind));
            }
            let s = state.sensor_mut(&f.target).ok_or_else(|| FaultError::UnknownTarget(f.target.clone()))?;
            if f.kind == FaultKind::SensorFail {
                if s.state != SensorState::Failed {
                    let back_to = if s.state == SensorState::Standby { SensorState::Standby } else { SensorState::Healthy };
                    s.state = SensorState::Failed;
                    let id = s.id.clone();
                    state.repairs.insert(id, (u64::MAX, back_to));
                }
            } else {
                if !(0.0..=1.0).contains(&f.magnitude) {
                    return Err(FaultError::Magnitude(f.magnitude));
                }
                s.seal_integrity *= 1.0 - f.magnitude;
            }
        }
        FaultKind::HeatSpike => {
            if f.target != ENVIRONMENT {
                return Err(FaultError::UnknownTarget(f.target.clone()));
            }
            match f.duration {
                Some(d) => state.heat_spikes.push((now + d, f.magnitude)),
                None => state.heat_input += f.magnitude,
            }
        }
        FaultKind::HumiditySurge => {
            if f.target != ENVIRONMENT {
                return Err(FaultError::UnknownTarget(f.target.clone()));
            }
            if !(f.magnitude >= 0.0) {
                return Err(FaultError::Magnitude(f.magnitude));
            }
            let level = f.level.unwrap_or(DEFAULT_SURGE_LEVEL).clamp(0.0, 1.0);
            state.humidity_override = Some((now + f.magnitude.round() as u64, level));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub config: PlantConfig,
    pub environment: EnvironmentProfile,
    pub groups: Vec<GroupConfig>,
    pub state: PlantState,
}

pub const KPI_TEMPERATURE: &str = "temperature";
pub const KPI_DEVIATION: &str = "temperature_deviation";
pub const KPI_HUMIDITY: &str = "humidity";
pub const KPI_AVAILABILITY: &str = "sensor_availability";
pub const KPI_CPU: &str = "cpu_utilisation";
pub const KPI_FAILED: &str = "failed_sensors";
/// Failed sensors whose repair is not yet expedited.
pub const KPI_REPAIR_BACKLOG: &str = "repair_backlog";
pub const FN_SENSING: &str = "sensing";
pub const FN_THERMAL: &str = "thermal";

pub fn hazard_kpi(sensor: &str) -> String {
    format!("hazard.{sensor}")
}

pub fn reading_kpi(sensor: &str) -> String {
    format!("reading.{sensor}")
}

pub fn spare_kpi(group: &str) -> String {
    format!("group.{group}.spare")
}

pub fn standby_kpi(group: &str) -> String {
    format!("group.{group}.standby")
}

impl Plant {
    pub fn new(
        config: PlantConfig,
        environment: EnvironmentProfile,
        groups: Vec<GroupConfig>,
        sensors: &[SensorConfig],
    ) -> Self {
        let humidity = environment.humidity_at(0);
        let state = PlantState {
            temperature: config.initial_temperature.unwrap_or(config.setpoint),
            setpoint: config.setpoint,
            heat_input: config.heat_input,
            cooling_capacity: config.cooling_capacity,
            humidity,
            ambient_humidity: humidity,
            sensors: sensors.iter().map(SensorConfig::unit).collect(),
            time: SimTime::ZERO,
            compute_capacity: config.compute.capacity,
            heat_spikes: Vec::new(),
            humidity_override: None,
            repairs: BTreeMap::new(),
        };
        Plant { config, environment, groups, state }
    }

    /// Healthy critical sensors per group, capped at what each group requires,
    /// over the total requirement. Groups with no requirement are ignored.
    pub fn sensor_availability(&self) -> f64 {
        let mut have = 0u32;
        let mut need = 0u32;
        for g in &self.groups {
            let healthy = self.healthy_critical(&g.id);
            have += healthy.min(g.required);
            need += g.required;
        }
        if need == 0 {
            1.0
        } else {
            have as f64 / need as f64
        }
    }

    pub fn healthy_critical(&self, group: &str) -> u32 {
        self.state
            .sensors
            .iter()
            .filter(|s| s.group == group && s.is_critical() && s.state == SensorState::Healthy)
            .count() as u32
    }

    pub fn standby_in(&self, group: &str) -> Vec<&SensorUnit> {
        self.state.sensors.iter().filter(|s| s.group == group && s.state == SensorState::Standby).collect()
    }

    pub fn cpu_utilisation(&self) -> f64 {
        let c = &self.config.compute;
        let rate: f64 = self
            .state
            .sensors
            .iter()
            .filter(|s| s.state == SensorState::Healthy)
            .map(|s| s.sampling_rate)
            .sum();
        if self.state.compute_capacity <= 0.0 {
            return 1.0;
        }
        ((c.base_load + c.load_per_sample * rate) / self.state.compute_capacity).clamp(0.0, 1.0)
    }

    pub fn effective_cooling(&self, controls: &Controls) -> f64 {
        (self.state.cooling_capacity + controls.cooling_delta).clamp(0.0, 1.0)
    }

    /// Advances one tick. `faults` are the faults due at the new tick; they
    /// are applied before the dynamics.
    pub fn step<R: Rng>(&mut self, controls: &Controls, faults: &[FaultSpec], rng: &mut R) -> StepOutput {
        let mut out = StepOutput::default();
        let now = self.state.time.tick() + 1;
        self.state.time = SimTime(now);

        let due: Vec<String> = self
            .state
            .repairs
            .iter()
            .filter(|(_, (when, _))| *when <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in due {
            let (_, back_to) = self.state.repairs.remove(&id).expect("due repair present");
            if let Some(s) = self.state.sensor_mut(&id) {
                s.state = back_to;
                s.seal_integrity = 1.0;
                s.age_ticks = 0;
                s.sample_phase = 0.0;
                out.events.push(PlantEvent::SensorRepaired { sensor: id, group: s.group.clone() });
            }
        }
        self.state.heat_spikes.retain(|(end, _)| *end > now);
        if self.state.humidity_override.is_some_and(|(until, _)| until <= now) {
            self.state.humidity_override = None;
        }

        for f in faults {
            match inject_fault(&mut self.state, f) {
                Ok(()) => {
                    if f.kind == FaultKind::SensorFail {
                        self.on_injected_failure(&f.target, now, &mut out);
                    }
                    out.events.push(PlantEvent::FaultApplied { fault: f.clone() });
                }
                Err(e) => out.events.push(PlantEvent::FaultRejected { fault: f.clone(), reason: e.to_string() }),
            }
        }

        let ambient = match self.state.humidity_override {
            Some((_, level)) => level,
            None => self.environment.humidity_at(now),
        };
        self.state.ambient_humidity = ambient;
        let humidity = (ambient + controls.humidity_delta).clamp(0.0, 1.0);
        self.state.humidity = humidity;

        let spikes: f64 = self.state.heat_spikes.iter().map(|(_, m)| m).sum();
        let heat = self.state.heat_input + self.environment.heat_at(now) + spikes + controls.heat_delta;
        let cooling = self.effective_cooling(controls);
        let noise_t = gaussian(rng, self.config.sigma_t);
        let t = self.state.temperature;
        self.state.temperature = t + heat - self.config.kappa * cooling * (t - self.config.t_ambient) + noise_t;

        let hp = self.config.hazard;
        let wear = if hp.h_crit < 1.0 {
            self.config.seal_wear * (humidity - hp.h_crit).max(0.0) / (1.0 - hp.h_crit)
        } else {
            0.0
        };
        let repair_at = now + self.config.repair_ticks;
        for i in 0..self.state.sensors.len() {
            let u: f64 = rng.gen();
            let s = &mut self.state.sensors[i];
            if s.state != SensorState::Healthy {
                continue;
            }
            let p = failure_probability(s, humidity, &hp);
            if u < p {
                out.events.push(PlantEvent::SensorFailed(SensorFailure {
                    sensor: s.id.clone(),
                    group: s.group.clone(),
                    critical: s.is_critical(),
                    humidity,
                    seal_integrity: s.seal_integrity,
                    age_ticks: s.age_ticks,
                    cause: FailureCause::Hazard,
                }));
                s.state = SensorState::Failed;
                self.state.repairs.insert(s.id.clone(), (repair_at, SensorState::Healthy));
            } else {
                s.age_ticks += 1;
                s.seal_integrity = (s.seal_integrity * (1.0 - wear)).clamp(0.0, 1.0);
            }
        }

        let time = self.state.time;
        let temperature = self.state.temperature;
        for i in 0..self.state.sensors.len() {
            let n = gaussian(rng, self.config.sigma_s);
            let s = &mut self.state.sensors[i];
            if s.state != SensorState::Healthy {
                continue;
            }
            s.sample_phase += s.sampling_rate;
            if s.sample_phase >= 1.0 {
                s.sample_phase -= s.sample_phase.floor();
                out.samples.push(KpiSample::new(reading_kpi(&s.id), time, temperature + n));
            }
        }

        let deviation = self.state.deviation();
        let availability = self.sensor_availability();
        out.samples.push(KpiSample::new(KPI_TEMPERATURE, time, temperature));
        out.samples.push(KpiSample::new(KPI_DEVIATION, time, deviation));
        out.samples.push(KpiSample::new(KPI_HUMIDITY, time, ambient));
        out.samples.push(KpiSample::new(KPI_AVAILABILITY, time, availability));
        out.samples.push(KpiSample::new(KPI_CPU, time, self.cpu_utilisation()));
        out.samples.push(KpiSample::new(KPI_FAILED, time, self.state.failed_sensors().len() as f64));
        let backlog = self.state.repairs.values().filter(|(due, _)| *due > now + self.config.expedited_repair_ticks).count();
        out.samples.push(KpiSample::new(KPI_REPAIR_BACKLOG, time, backlog as f64));
        for s in self.state.sensors.iter().filter(|s| s.is_critical()) {
            let p = if s.state == SensorState::Healthy { failure_probability(s, humidity, &hp) } else { 0.0 };
            out.samples.push(KpiSample::new(hazard_kpi(&s.id), time, p));
        }
        for g in &self.groups {
            let spare = self.healthy_critical(&g.id) as f64 - g.required as f64;
            out.samples.push(KpiSample::new(spare_kpi(&g.id), time, spare));
            out.samples.push(KpiSample::new(standby_kpi(&g.id), time, self.standby_in(&g.id).len() as f64));
        }

        let mut up = BTreeMap::new();
        up.insert(FN_SENSING.to_string(), availability >= 1.0);
        up.insert(FN_THERMAL.to_string(), deviation <= self.config.deviation_critical);
        out.events.push(PlantEvent::Status { up });
        out
    }

    fn on_injected_failure(&mut self, id: &str, now: u64, out: &mut StepOutput) {
        let repair_at = now + self.config.repair_ticks;
        let humidity = self.state.humidity;
        if let Some((when, _)) = self.state.repairs.get_mut(id) {
            if *when == u64::MAX {
                *when = repair_at;
                let s = self.state.sensor(id).expect("repair entry for known sensor");
                out.events.push(PlantEvent::SensorFailed(SensorFailure {
                    sensor: s.id.clone(),
                    group: s.group.clone(),
                    critical: s.is_critical(),
                    humidity,
                    seal_integrity: s.seal_integrity,
                    age_ticks: s.age_ticks,
                    cause: FailureCause::Injected,
                }));
            }
        }
    }

    /// Brings a standby sensor online. Returns false if it is not in standby.
    pub fn bring_online(&mut self, id: &str) -> bool {
        match self.state.sensor_mut(id) {
            Some(s) if s.state == SensorState::Standby => {
                s.state = SensorState::Healthy;
                s.sample_phase = 0.0;
                true
            }
            _ => false,
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    // Always draw so the stream stays aligned even when sigma is zero.
    let z: f64 = StandardNormal.sample(rng);
    if sigma > 0.0 {
        z * sigma
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn sensor(base: f64) -> SensorUnit {
        SensorConfig {
            id: "t1".into(),
            group: "temp".into(),
            role: SensorRole::Primary,
            criticality: Criticality::Critical,
            sampling_rate: 1.0,
            base_hazard: base,
            seal_integrity: 1.0,
            age_ticks: 0,
        }
        .unit()
    }

    fn quiet_plant() -> Plant {
        let cfg = PlantConfig {
            heat_input: 0.0,
            cooling_capacity: 0.0,
            sigma_t: 0.0,
            sigma_s: 0.0,
            initial_temperature: Some(293.15),
            ..PlantConfig::default()
        };
        let sensors = vec![
            SensorConfig {
                id: "t1".into(),
                group: "temp".into(),
                role: SensorRole::Primary,
                criticality: Criticality::Critical,
                sampling_rate: 1.0,
                base_hazard: 0.0,
                seal_integrity: 1.0,
                age_ticks: 0,
            },
            SensorConfig {
                id: "t2".into(),
                group: "temp".into(),
                role: SensorRole::Redundant,
                criticality: Criticality::Critical,
                sampling_rate: 1.0,
                base_hazard: 0.0,
                seal_integrity: 1.0,
                age_ticks: 0,
            },
        ];
        Plant::new(cfg, EnvironmentProfile::default(), vec![GroupConfig { id: "temp".into(), required: 1 }], &sensors)
    }

    #[test]
    fn zero_hazard_never_fails() {
        for h in [0.0, 0.5, 0.99, 1.0] {
            assert_eq!(failure_probability(&sensor(0.0), h, &HazardParams::default()), 0.0);
        }
    }

    #[test]
    fn dry_new_sensor_has_base_hazard() {
        let p = failure_probability(&sensor(0.013), 0.6, &HazardParams::default());
        assert_eq!(p, 0.013);
    }

    #[test]
    fn humid_fixture_matches_formula_oracle() {
        // Computed independently: 0.4 * (1 + 1.5 * 0.35 / 0.4) * 1 * 1 = 0.925
        let hp = HazardParams { k_h: 1.5, h_crit: 0.6, ..HazardParams::default() };
        let p = failure_probability(&sensor(0.4), 0.95, &hp);
        assert!((p - 0.925).abs() < 1e-12, "{p}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let mut plant = quiet_plant();
        let mut rng = stream(1, Stream::Plant);
        for _ in 0..20 {
            plant.step(&Controls::default(), &[], &mut rng);
        }
        assert_eq!(plant.state.temperature, 293.15);
    }

    #[test]
    fn forced_failure_silences_sensor() {
        let mut plant = quiet_plant();
        let mut rng = stream(1, Stream::Plant);
        let f = FaultSpec {
            kind: FaultKind::SensorFail,
            target: "t1".into(),
            at_tick: SimTime(1),
            magnitude: 1.0,
            duration: None,
            level: None,
        };
        let out = plant.step(&Controls::default(), &[f], &mut rng);
        assert_eq!(plant.state.sensor("t1").unwrap().state, SensorState::Failed);
        assert!(!out.samples.iter().any(|s| s.kpi == reading_kpi("t1")));
        assert!(out.events.iter().any(|e| matches!(e, PlantEvent::SensorFailed(f) if f.cause == FailureCause::Injected)));
    }

    #[test]
    fn unknown_fault_target_is_reported_and_run_continues() {
        let mut plant = quiet_plant();
        let mut rng = stream(1, Stream::Plant);
        let f = FaultSpec {
            kind: FaultKind::SensorFail,
            target: "nope".into(),
            at_tick: SimTime(1),
            magnitude: 1.0,
            duration: None,
            level: None,
        };
        let out = plant.step(&Controls::default(), &[f], &mut rng);
        assert!(out.events.iter().any(|e| matches!(e, PlantEvent::FaultRejected { .. })));
        assert_eq!(plant.state.time, SimTime(1));
    }

    #[test]
    fn seal_degrade_arithmetic() {
        let mut plant = quiet_plant();
        plant.state.sensor_mut("t1").unwrap().seal_integrity = 0.8;
        let f = |m| FaultSpec {
            kind: FaultKind::SealDegrade,
            target: "t1".into(),
            at_tick: SimTime(0),
            magnitude: m,
            duration: None,
            level: None,
        };
        inject_fault(&mut plant.state, &f(0.5)).unwrap();
        assert!((plant.state.sensor("t1").unwrap().seal_integrity - 0.4).abs() < 1e-12);
        inject_fault(&mut plant.state, &f(1.0)).unwrap();
        assert_eq!(plant.state.sensor("t1").unwrap().seal_integrity, 0.0);
    }

    #[test]
    fn sensor_fail_is_idempotent() {
        let mut plant = quiet_plant();
        let f = FaultSpec {
            kind: FaultKind::SensorFail,
            target: "t1".into(),
            at_tick: SimTime(0),
            magnitude: 1.0,
            duration: None,
            level: None,
        };
        inject_fault(&mut plant.state, &f).unwrap();
        let before = plant.state.clone();
        inject_fault(&mut plant.state, &f).unwrap();
        assert_eq!(before, plant.state);
    }

    #[test]
    fn series_interpolates_and_holds() {
        let s = Series(vec![(10, 0.2), (20, 0.6)]);
        assert_eq!(s.at(0), 0.2);
        assert!((s.at(15) - 0.4).abs() < 1e-12);
        assert_eq!(s.at(99), 0.6);
    }

    #[test]
    fn redundant_sensors_start_in_standby() {
        let plant = quiet_plant();
        assert_eq!(plant.state.sensor("t2").unwrap().state, SensorState::Standby);
        assert_eq!(plant.sensor_availability(), 1.0);
    }
}
