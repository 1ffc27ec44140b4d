//! Tabular epsilon-greedy learning agent over a four-action set.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Directive, DirectiveKind, LayerId};
use crate::plant::{standby_kpi, KPI_AVAILABILITY, KPI_DEVIATION};

use super::rules::risk_id;
use super::DecisionContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    NoOp,
    ActivateRedundancy,
    CoolingBoost,
    Both,
}

impl AgentAction {
    pub const ALL: [AgentAction; 4] = [AgentAction::NoOp, AgentAction::ActivateRedundancy, AgentAction::CoolingBoost, AgentAction::Both];

    pub fn index(self) -> usize {
        self as usize
    }

    fn redundancy(self) -> bool {
        matches!(self, AgentAction::ActivateRedundancy | AgentAction::Both)
    }

    fn cooling(self) -> bool {
        matches!(self, AgentAction::CoolingBoost | AgentAction::Both)
    }
}

/// Bin edges per feature. A value `v` falls in bin `#{edges e : v >= e}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateBins {
    pub risk: Vec<f64>,
    pub deviation: Vec<f64>,
    pub availability: Vec<f64>,
    pub budget: Vec<f64>,
}

impl Default for StateBins {
    fn default() -> Self {
        StateBins { risk: vec![0.3, 0.7], deviation: vec![2.0, 5.0], availability: vec![0.95], budget: vec![1.0] }
    }
}

fn bin(edges: &[f64], v: f64) -> usize {
    edges.iter().filter(|e| v >= **e).count()
}

impl StateBins {
    pub fn state(&self, risk: f64, deviation: f64, availability: f64, budget: f64) -> String {
        format!(
            "r{}.d{}.a{}.b{}",
            bin(&self.risk, risk),
            bin(&self.deviation, deviation),
            bin(&self.availability, availability),
            bin(&self.budget, budget)
        )
    }

    pub fn of(&self, ctx: &DecisionContext) -> String {
        self.state(
            ctx.max_risk(),
            ctx.kpis.latest(KPI_DEVIATION).unwrap_or(0.0),
            ctx.kpis.latest(KPI_AVAILABILITY).unwrap_or(1.0),
            ctx.budget,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicyTable {
    pub state_bins: StateBins,
    /// Q-values per state, indexed by [`AgentAction::index`]. Missing states read as zero.
    pub q_values: BTreeMap<String, [f64; 4]>,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl AgentPolicyTable {
    pub fn new(state_bins: StateBins, epsilon: f64, alpha: f64, gamma: f64) -> Self {
        AgentPolicyTable { state_bins, q_values: BTreeMap::new(), epsilon, alpha, gamma }
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [("epsilon", self.epsilon), ("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn q(&self, state: &str, a: AgentAction) -> f64 {
        self.q_values.get(state).map_or(0.0, |row| row[a.index()])
    }

    /// Highest-valued action; ties go to the earliest action.
    pub fn greedy(&self, state: &str) -> AgentAction {
        let mut best = AgentAction::NoOp;
        for a in AgentAction::ALL {
            if self.q(state, a) > self.q(state, best) {
                best = a;
            }
        }
        best
    }

    pub fn max_q(&self, state: &str) -> f64 {
        AgentAction::ALL.iter().map(|a| self.q(state, *a)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut t = self.clone();
        for row in t.q_values.values_mut() {
            row.iter_mut().for_each(|q| *q *= c);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub deviation: f64,
    pub downtime: f64,
    pub cost: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { deviation: 1.0, downtime: 10.0, cost: 0.1 }
    }
}

impl RewardWeights {
    pub fn reward(&self, deviation: f64, down: bool, cost: f64) -> f64 {
        -(self.deviation * deviation + self.downtime * if down { 1.0 } else { 0.0 } + self.cost * cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub weights: RewardWeights,
    /// Cooling capacity added by the cooling action.
    pub cooling_step: f64,
    pub bins: StateBins,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            epsilon: 0.1,
            alpha: 0.2,
            gamma: 0.9,
            weights: RewardWeights::default(),
            cooling_step: 0.02,
            bins: StateBins::default(),
        }
    }
}

impl AgentConfig {
    pub fn table(&self) -> AgentPolicyTable {
        AgentPolicyTable::new(self.bins.clone(), self.epsilon, self.alpha, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentChoice {
    pub state: String,
    pub action: AgentAction,
    pub explored: bool,
}

/// Where the agent's actions land.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentTargets {
    pub groups: Vec<String>,
    pub cooling_cm: Option<String>,
    pub cooling_step: f64,
}

pub fn learning_agent_decide<R: Rng>(
    table: &AgentPolicyTable,
    ctx: &DecisionContext,
    targets: &AgentTargets,
    rng: &mut R,
) -> (Vec<Directive>, AgentChoice) {
    let state = table.state_bins.of(ctx);
    let explore = rng.gen::<f64>() < table.epsilon;
    let action = if explore { AgentAction::ALL[rng.gen_range(0..4)] } else { table.greedy(&state) };
    let t = ctx.time.tick();
    let mut out = Vec::new();
    if action.redundancy() {
        // Riskiest group that still has a standby sensor.
        let pick = targets
            .groups
            .iter()
            .filter(|g| ctx.kpis.latest(&standby_kpi(g)).is_some_and(|n| n >= 1.0))
            .map(|g| (ctx.scalar(&format!("risk.{}", risk_id(g))).unwrap_or(0.0), g))
            .fold(None, |best: Option<(f64, &String)>, (p, g)| match best {
                Some((bp, _)) if bp >= p => best,
                _ => Some((p, g)),
            });
        if let Some((_, g)) = pick {
            out.push(
                Directive::new(format!("a{t:06}.redundancy.{g}"), DirectiveKind::ActivateCm, g.clone())
                    .with_priority(80)
                    .issued(LayerId::AdaptiveCoordination, ctx.time),
            );
        }
    }
    if action.cooling() {
        if let Some(cm) = &targets.cooling_cm {
            out.push(
                Directive::new(format!("a{t:06}.cooling.{cm}"), DirectiveKind::ActivateCm, cm.clone())
                    .with_priority(90)
                    .with_param("delta", targets.cooling_step)
                    .issued(LayerId::AdaptiveCoordination, ctx.time),
            );
        }
    }
    (out, AgentChoice { state, action, explored: explore })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: String,
    pub action: AgentAction,
    pub reward: f64,
    pub next: String,
}

/// One-step temporal-difference update.
pub fn learn(table: &mut AgentPolicyTable, tr: &Transition) {
    if !tr.reward.is_finite() {
        return;
    }
    let target = tr.reward + table.gamma * table.max_q(&tr.next);
    let alpha = table.alpha;
    let row = table.q_values.entry(tr.state.clone()).or_insert([0.0; 4]);
    let q = &mut row[tr.action.index()];
    *q += alpha * (target - *q);
}
