//! Universal countermeasures: redundant sensor activation and structural
//! resources with a lead time. Never acts without a directive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{FeedbackReport, SimTime};
use crate::plant::Plant;

/// Ticks between a redundant-sensor activation and the sensor reporting healthy.
pub const SENSOR_ACTIVATION_LATENCY: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceConfig {
    pub id: String,
    #[serde(default)]
    pub lead_time: u64,
    /// Compute capacity added once online.
    #[serde(default)]
    pub compute_capacity: f64,
    #[serde(default)]
    pub activation_cost: f64,
    #[serde(default)]
    pub online: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StructuralEvent {
    SensorActivationScheduled { group: String, sensor: String, due: SimTime },
    SensorOnline { group: String, sensor: String },
    ResourceScheduled { resource: String, due: SimTime },
    ResourceOnline { resource: String },
}

#[derive(Debug, Clone, PartialEq)]
struct ResourceState {
    config: ResourceConfig,
    online: bool,
    due: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructuralLayer {
    resources: BTreeMap<String, ResourceState>,
    pending_sensors: Vec<(u64, String, String)>,
}

impl StructuralLayer {
    pub fn new(resources: &[ResourceConfig]) -> Self {
        let resources = resources
            .iter()
            .map(|r| (r.id.clone(), ResourceState { config: r.clone(), online: r.online, due: None }))
            .collect();
        StructuralLayer { resources, pending_sensors: Vec::new() }
    }

    pub fn is_online(&self, resource: &str) -> Option<bool> {
        self.resources.get(resource).map(|r| r.online)
    }

    pub fn pending_in(&self, group: &str) -> usize {
        self.pending_sensors.iter().filter(|(_, _, g)| g == group).count()
    }

    /// Schedules the lowest-id standby sensor of `group` to come online after
    /// the activation latency.
    pub fn activate_redundant_sensor(
        &mut self,
        plant: &Plant,
        group: &str,
        directive_id: &str,
        now: SimTime,
    ) -> (FeedbackReport, Vec<StructuralEvent>) {
        let mut candidates: Vec<&str> = plant
            .standby_in(group)
            .into_iter()
            .map(|s| s.id.as_str())
            .filter(|id| !self.pending_sensors.iter().any(|(_, s, _)| s == id))
            .collect();
        candidates.sort_unstable();
        let Some(sensor) = candidates.first().map(|s| s.to_string()) else {
            return (FeedbackReport::failed(directive_id, now, format!("no standby sensor left in {group}")), Vec::new());
        };
        let due = now.plus(SENSOR_ACTIVATION_LATENCY);
        self.pending_sensors.push((due.tick(), sensor.clone(), group.to_string()));
        // One sensor unit requested, one scheduled.
        let report = FeedbackReport::completed(directive_id, 1.0, now, format!("{sensor} online at {due}"));
        (report, vec![StructuralEvent::SensorActivationScheduled { group: group.into(), sensor, due }])
    }

    pub fn strengthen_baseline(&mut self, resource: &str, directive_id: &str, now: SimTime) -> (FeedbackReport, Vec<StructuralEvent>) {
        let Some(r) = self.resources.get_mut(resource) else {
            return (FeedbackReport::rejected(directive_id, now, format!("unknown resource {resource}")), Vec::new());
        };
        if r.online {
            return (FeedbackReport::completed(directive_id, 0.0, now, "already online"), Vec::new());
        }
        if let Some(due) = r.due {
            return (FeedbackReport::completed(directive_id, 0.0, now, format!("already scheduled for t{due}")), Vec::new());
        }
        let due = now.plus(r.config.lead_time);
        r.due = Some(due.tick());
        let report = FeedbackReport::completed(directive_id, 1.0, now, format!("{resource} online at {due}"));
        (report, vec![StructuralEvent::ResourceScheduled { resource: resource.into(), due }])
    }

    /// Applies everything due at or before `now`.
    pub fn advance(&mut self, plant: &mut Plant, now: SimTime) -> Vec<StructuralEvent> {
        let mut events = Vec::new();
        let (due, rest): (Vec<_>, Vec<_>) = self.pending_sensors.drain(..).partition(|(t, _, _)| *t <= now.tick());
        self.pending_sensors = rest;
        for (_, sensor, group) in due {
            if plant.bring_online(&sensor) {
                events.push(StructuralEvent::SensorOnline { group, sensor });
            }
        }
        for (id, r) in self.resources.iter_mut() {
            if r.due.is_some_and(|t| t <= now.tick()) {
                r.due = None;
                r.online = true;
                plant.state.compute_capacity += r.config.compute_capacity;
                events.push(StructuralEvent::ResourceOnline { resource: id.clone() });
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeedbackStatus;
    use crate::plant::{Criticality, EnvironmentProfile, GroupConfig, PlantConfig, SensorConfig, SensorRole, SensorState};

    fn plant(standby: &[&str]) -> Plant {
        let mut sensors = vec![SensorConfig {
            id: "t1".into(),
            group: "temp".into(),
            role: SensorRole::Primary,
            criticality: Criticality::Critical,
            sampling_rate: 1.0,
            base_hazard: 0.0,
            seal_integrity: 1.0,
            age_ticks: 0,
        }];
        for id in standby {
            sensors.push(SensorConfig { id: id.to_string(), role: SensorRole::Redundant, ..sensors[0].clone() });
        }
        Plant::new(PlantConfig::default(), EnvironmentProfile::default(), vec![GroupConfig { id: "temp".into(), required: 1 }], &sensors)
    }

    #[test]
    fn single_standby_comes_online_next_tick() {
        let mut p = plant(&["r1"]);
        let mut s = StructuralLayer::default();
        let (rep, _) = s.activate_redundant_sensor(&p, "temp", "d1", SimTime(4));
        assert_eq!(rep.status, FeedbackStatus::Completed);
        assert!(s.advance(&mut p, SimTime(4)).is_empty());
        assert_eq!(s.advance(&mut p, SimTime(5)).len(), 1);
        assert_eq!(p.state.sensor("r1").unwrap().state, SensorState::Healthy);
    }

    #[test]
    fn exhausted_redundancy_fails() {
        let p = plant(&[]);
        let mut s = StructuralLayer::default();
        let (rep, _) = s.activate_redundant_sensor(&p, "temp", "d1", SimTime(4));
        assert_eq!(rep.status, FeedbackStatus::Failed);
        assert_eq!(rep.effectiveness, 0.0);
    }

    #[test]
    fn lowest_id_standby_is_picked() {
        let p = plant(&["r9", "r2"]);
        let mut s = StructuralLayer::default();
        let (_, ev) = s.activate_redundant_sensor(&p, "temp", "d1", SimTime(1));
        assert!(matches!(&ev[0], StructuralEvent::SensorActivationScheduled { sensor, .. } if sensor == "r2"));
        let (_, ev) = s.activate_redundant_sensor(&p, "temp", "d2", SimTime(1));
        assert!(matches!(&ev[0], StructuralEvent::SensorActivationScheduled { sensor, .. } if sensor == "r9"));
    }

    #[test]
    fn resource_lead_time() {
        let mut p = plant(&[]);
        let mut s = StructuralLayer::new(&[ResourceConfig {
            id: "redundant_node".into(),
            lead_time: 2,
            compute_capacity: 0.5,
            activation_cost: 1.0,
            online: false,
        }]);
        let (rep, _) = s.strengthen_baseline("redundant_node", "d1", SimTime(10));
        assert_eq!(rep.status, FeedbackStatus::Completed);
        assert!(s.advance(&mut p, SimTime(11)).is_empty());
        assert_eq!(s.advance(&mut p, SimTime(12)).len(), 1);
        assert_eq!(s.is_online("redundant_node"), Some(true));
        assert_eq!(p.state.compute_capacity, 1.5);
        let (again, _) = s.strengthen_baseline("redundant_node", "d2", SimTime(13));
        assert_eq!((again.status, again.effectiveness), (FeedbackStatus::Completed, 0.0));
        let (unknown, _) = s.strengthen_baseline("ghost", "d3", SimTime(13));
        assert_eq!(unknown.status, FeedbackStatus::Rejected);
    }
}
