//! Risk-specific countermeasures. Each engaged countermeasure adds its
//! mapped parameters onto plant controls; the sum is recomputed every tick,
//! so deactivation restores the prior control values exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Bounds, CmScope, CmState, Countermeasure, FeedbackReport, RiskCategory, SimTime};
use crate::plant::{Controls, Criticality, Plant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    CoolingCapacity,
    HeatInput,
    Humidity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmConfig {
    pub id: String,
    pub scope: CmScope,
    #[serde(default)]
    pub target_risk: Option<RiskCategory>,
    /// Category used for priority shifts; defaults to `target_risk`, then physical.
    #[serde(default)]
    pub category: Option<RiskCategory>,
    #[serde(default)]
    pub bounds: BTreeMap<String, Bounds>,
    #[serde(default)]
    pub defaults: BTreeMap<String, f64>,
    #[serde(default)]
    pub effects: BTreeMap<String, Control>,
    #[serde(default)]
    pub activation_cost: f64,
    #[serde(default)]
    pub priority: i64,
    /// Component ids this countermeasure mitigates (for incident attribution).
    #[serde(default)]
    pub protects: Vec<String>,
}

impl CmConfig {
    pub fn category(&self) -> RiskCategory {
        self.category.or(self.target_risk).unwrap_or(RiskCategory::Physical)
    }

    pub fn countermeasure(&self) -> Countermeasure {
        Countermeasure {
            id: self.id.clone(),
            scope: self.scope,
            target_risk: self.target_risk,
            state: CmState::Inactive,
            parameters: self.defaults.clone(),
            bounds: self.bounds.clone(),
            activation_cost: self.activation_cost,
            priority: self.priority,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        self.countermeasure().check()?;
        for p in self.effects.keys() {
            if !self.bounds.contains_key(p) {
                return Err(format!("{}: effect parameter {p} has no bounds", self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DefenseEvent {
    StateChanged { cm: String, from: CmState, to: CmState },
    ParametersChanged { cm: String, parameters: BTreeMap<String, f64> },
    SamplingReduced { sensors: Vec<String>, factor: f64, credit: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseLayer {
    cms: BTreeMap<String, Countermeasure>,
    effects: BTreeMap<String, BTreeMap<String, Control>>,
    pending_off: BTreeSet<String>,
    /// Resource units freed per sample-per-tick of throttled sampling.
    pub sample_cost: f64,
}

impl DefenseLayer {
    pub fn new(catalog: &[CmConfig], sample_cost: f64) -> Self {
        DefenseLayer {
            cms: catalog.iter().map(|c| (c.id.clone(), c.countermeasure())).collect(),
            effects: catalog.iter().map(|c| (c.id.clone(), c.effects.clone())).collect(),
            pending_off: BTreeSet::new(),
            sample_cost,
        }
    }

    pub fn get(&self, id: &str) -> Option<&Countermeasure> {
        self.cms.get(id)
    }

    pub fn states(&self) -> BTreeMap<String, CmState> {
        self.cms.iter().map(|(k, v)| (k.clone(), v.state)).collect()
    }

    /// Sum of the mapped parameters of every engaged countermeasure, optionally skipping one.
    fn controls_excluding(&self, skip: Option<&str>) -> Controls {
        let mut c = Controls::default();
        for (id, cm) in &self.cms {
            if !cm.state.is_engaged() || Some(id.as_str()) == skip {
                continue;
            }
            add_effects(&mut c, &self.effects[id], &cm.parameters);
        }
        c
    }

    pub fn controls(&self) -> Controls {
        self.controls_excluding(None)
    }

    pub fn activate_countermeasure(
        &mut self,
        plant: &Plant,
        id: &str,
        params: &BTreeMap<String, f64>,
        directive_id: &str,
        now: SimTime,
    ) -> (FeedbackReport, Vec<DefenseEvent>) {
        let others = self.controls_excluding(Some(id));
        let Some(cm) = self.cms.get_mut(id) else {
            return (FeedbackReport::rejected(directive_id, now, format!("unknown countermeasure {id}")), Vec::new());
        };
        let mut merged = cm.parameters.clone();
        merged.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        if let Err(e) = crate::model::check_params(&merged, &cm.bounds) {
            return (FeedbackReport::rejected(directive_id, now, e), Vec::new());
        }
        let mut events = Vec::new();
        let was_off_pending = self.pending_off.remove(id);
        let same = merged == cm.parameters;
        if cm.state != CmState::Inactive && same && !was_off_pending {
            return (FeedbackReport::completed(directive_id, 0.0, now, "already engaged"), events);
        }
        if !same {
            cm.parameters = merged.clone();
            events.push(DefenseEvent::ParametersChanged { cm: id.into(), parameters: merged.clone() });
        }
        if cm.state == CmState::Inactive {
            cm.transition(CmState::Activating).expect("inactive -> activating");
            events.push(DefenseEvent::StateChanged { cm: id.into(), from: CmState::Inactive, to: CmState::Activating });
        }
        let eff = applied_fraction(plant, &others, &self.effects[id], &merged);
        (FeedbackReport::completed(directive_id, eff, now, format!("{id} engaging")), events)
    }

    pub fn deactivate_countermeasure(&mut self, id: &str, directive_id: &str, now: SimTime) -> (FeedbackReport, Vec<DefenseEvent>) {
        let Some(cm) = self.cms.get_mut(id) else {
            return (FeedbackReport::rejected(directive_id, now, format!("unknown countermeasure {id}")), Vec::new());
        };
        match cm.state {
            CmState::Inactive => (FeedbackReport::completed(directive_id, 0.0, now, "already inactive"), Vec::new()),
            CmState::Activating => {
                cm.transition(CmState::Inactive).expect("cancel activation");
                let ev = DefenseEvent::StateChanged { cm: id.into(), from: CmState::Activating, to: CmState::Inactive };
                (FeedbackReport::completed(directive_id, 1.0, now, "activation cancelled"), vec![ev])
            }
            CmState::Active | CmState::Degraded => {
                self.pending_off.insert(id.to_string());
                (FeedbackReport::completed(directive_id, 1.0, now, "inactive next tick"), Vec::new())
            }
        }
    }

    /// Adjusts parameters of a registered countermeasure without changing its state.
    pub fn adjust_parameters(&mut self, id: &str, params: &BTreeMap<String, f64>, directive_id: &str, now: SimTime) -> (FeedbackReport, Vec<DefenseEvent>) {
        let Some(cm) = self.cms.get_mut(id) else {
            return (FeedbackReport::rejected(directive_id, now, format!("unknown countermeasure {id}")), Vec::new());
        };
        let mut merged = cm.parameters.clone();
        merged.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        if let Err(e) = crate::model::check_params(&merged, &cm.bounds) {
            return (FeedbackReport::rejected(directive_id, now, e), Vec::new());
        }
        if merged == cm.parameters {
            return (FeedbackReport::completed(directive_id, 0.0, now, "unchanged"), Vec::new());
        }
        cm.parameters = merged.clone();
        (
            FeedbackReport::completed(directive_id, 1.0, now, "parameters updated"),
            vec![DefenseEvent::ParametersChanged { cm: id.into(), parameters: merged }],
        )
    }

    /// Multiplies the sampling rate of non-critical sensors by `factor`.
    /// Returns the report and the resource units freed.
    pub fn reduce_sampling(
        &mut self,
        plant: &mut Plant,
        sensors: &BTreeSet<String>,
        factor: f64,
        directive_id: &str,
        now: SimTime,
    ) -> (FeedbackReport, f64, Vec<DefenseEvent>) {
        if !(factor > 0.0 && factor <= 1.0) {
            return (FeedbackReport::rejected(directive_id, now, format!("factor {factor} outside (0, 1]")), 0.0, Vec::new());
        }
        for id in sensors {
            match plant.state.sensor(id) {
                None => return (FeedbackReport::rejected(directive_id, now, format!("unknown sensor {id}")), 0.0, Vec::new()),
                Some(s) if s.criticality == Criticality::Critical => {
                    return (
                        FeedbackReport::rejected(directive_id, now, format!("{id} is on the critical path")),
                        0.0,
                        Vec::new(),
                    )
                }
                Some(_) => {}
            }
        }
        let mut credit = 0.0;
        for id in sensors {
            let s = plant.state.sensor_mut(id).expect("checked above");
            credit += s.sampling_rate * (1.0 - factor) * self.sample_cost;
            s.sampling_rate *= factor;
        }
        let eff = if factor < 1.0 { 1.0 } else { 0.0 };
        let ev = DefenseEvent::SamplingReduced { sensors: sensors.iter().cloned().collect(), factor, credit };
        (FeedbackReport::completed(directive_id, eff, now, format!("freed {credit} units")), credit, vec![ev])
    }

    /// Tick-boundary transitions: activating -> active, pending deactivations
    /// -> inactive, and active <-> degraded depending on control saturation.
    pub fn advance(&mut self, plant: &Plant) -> Vec<DefenseEvent> {
        let mut events = Vec::new();
        let ids: Vec<String> = self.cms.keys().cloned().collect();
        for id in ids {
            let from = self.cms[&id].state;
            let to = if self.pending_off.remove(&id) {
                CmState::Inactive
            } else {
                match from {
                    CmState::Activating | CmState::Active | CmState::Degraded => {
                        let others = self.controls_excluding(Some(&id));
                        let cm = &self.cms[&id];
                        if applied_fraction(plant, &others, &self.effects[&id], &cm.parameters) < 1.0 {
                            if from == CmState::Activating { CmState::Active } else { CmState::Degraded }
                        } else {
                            CmState::Active
                        }
                    }
                    CmState::Inactive => CmState::Inactive,
                }
            };
            if to != from {
                self.cms.get_mut(&id).expect("known id").transition(to).expect("legal tick transition");
                events.push(DefenseEvent::StateChanged { cm: id.clone(), from, to });
            }
        }
        events
    }
}

fn add_effects(c: &mut Controls, effects: &BTreeMap<String, Control>, params: &BTreeMap<String, f64>) {
    for (param, control) in effects {
        let v = params.get(param).copied().unwrap_or(0.0);
        match control {
            Control::CoolingCapacity => c.cooling_delta += v,
            Control::HeatInput => c.heat_delta += v,
            Control::Humidity => c.humidity_delta += v,
        }
    }
}

/// Fraction of the requested cooling change that survives clamping to [0, 1].
/// Countermeasures without a cooling effect count as fully applied.
fn applied_fraction(plant: &Plant, others: &Controls, effects: &BTreeMap<String, Control>, params: &BTreeMap<String, f64>) -> f64 {
    let mut mine = Controls::default();
    add_effects(&mut mine, effects, params);
    if mine.cooling_delta == 0.0 {
        return 1.0;
    }
    let before = plant.effective_cooling(others);
    let after = plant.effective_cooling(&Controls { cooling_delta: others.cooling_delta + mine.cooling_delta, ..*others });
    crate::model::effectiveness((after - before).abs(), mine.cooling_delta.abs())
}
