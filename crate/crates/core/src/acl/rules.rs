//! Deterministic if-then rules over decision-context scalars.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{sort_directives, Directive, DirectiveKind, LayerId, Registry};
use crate::plant::{spare_kpi, standby_kpi, KPI_DEVIATION, KPI_HUMIDITY, KPI_REPAIR_BACKLOG, KPI_TEMPERATURE};

use super::DecisionContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Op {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            Op::Gt => a > b,
            Op::Ge => a >= b,
            Op::Lt => a < b,
            Op::Le => a <= b,
            Op::Eq => a == b,
            Op::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub var: String,
    pub op: Op,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    All(Vec<Condition>),
    Any(Vec<Condition>),
    Not(Box<Condition>),
    Cmp(Comparison),
}

impl Condition {
    pub fn cmp(var: impl Into<String>, op: Op, value: f64) -> Self {
        Condition::Cmp(Comparison { var: var.into(), op, value })
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::All(cs) | Condition::Any(cs) => cs.iter().for_each(|c| c.vars(out)),
            Condition::Not(c) => c.vars(out),
            Condition::Cmp(c) => {
                out.insert(c.var.clone());
            }
        }
    }

    /// Evaluates with every variable already resolved.
    fn eval(&self, values: &BTreeMap<String, f64>) -> bool {
        match self {
            Condition::All(cs) => cs.iter().all(|c| c.eval(values)),
            Condition::Any(cs) => cs.iter().any(|c| c.eval(values)),
            Condition::Not(c) => !c.eval(values),
            Condition::Cmp(c) => c.op.apply(values[&c.var], c.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub kind: DirectiveKind,
    pub target: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Lifetime in ticks; the directive expires at issue time plus this.
    #[serde(default)]
    pub expires_in: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: String,
    pub condition: Condition,
    pub action: Template,
    #[serde(default)]
    pub priority: i64,
    #[serde(default = "enabled")]
    pub enabled: bool,
}

fn enabled() -> bool {
    true
}

impl Rule {
    pub fn new(id: &str, condition: Condition, kind: DirectiveKind, target: &str, priority: i64) -> Self {
        Rule {
            id: id.into(),
            condition,
            action: Template { kind, target: target.into(), parameters: BTreeMap::new(), expires_in: None },
            priority,
            enabled: true,
        }
    }

    pub fn instantiate(&self, ctx: &DecisionContext) -> Directive {
        let t = &self.action;
        let mut d = Directive::new(format!("r{:06}.{}", ctx.time.tick(), self.id), t.kind, t.target.clone())
            .with_priority(self.priority)
            .issued(LayerId::AdaptiveCoordination, ctx.time);
        d.parameters = t.parameters.clone();
        if let Some(n) = t.expires_in {
            d = d.expiring(ctx.time.plus(n));
        }
        d
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleOutcome {
    pub directives: Vec<Directive>,
    pub diagnostics: Vec<String>,
}

/// Directives of every enabled rule whose condition holds, ordered by
/// priority (desc) then id. A rule referencing an unresolvable variable is
/// skipped with a diagnostic.
pub fn rule_engine_decide(rules: &[Rule], ctx: &DecisionContext) -> RuleOutcome {
    let mut out = RuleOutcome::default();
    for rule in rules.iter().filter(|r| r.enabled) {
        let mut vars = BTreeSet::new();
        rule.condition.vars(&mut vars);
        let mut values = BTreeMap::new();
        let mut missing = Vec::new();
        for v in vars {
            match ctx.scalar(&v) {
                Some(x) => {
                    values.insert(v, x);
                }
                None => missing.push(v),
            }
        }
        if !missing.is_empty() {
            out.diagnostics.push(format!("rule {} skipped: no value for {}", rule.id, missing.join(", ")));
            continue;
        }
        if rule.condition.eval(&values) {
            out.directives.push(rule.instantiate(ctx));
        }
    }
    sort_directives(&mut out.directives);
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("ruleset line {line}, column {column}: {message}")]
pub struct RulesetError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parses a JSON ruleset (an array of rules). Duplicate ids are errors.
pub fn load_ruleset(text: &str) -> Result<Vec<Rule>, RulesetError> {
    let rules: Vec<Rule> = serde_json::from_str(text)
        .map_err(|e| RulesetError { line: e.line(), column: e.column(), message: e.to_string() })?;
    let mut seen = BTreeSet::new();
    for r in &rules {
        if !seen.insert(r.id.as_str()) {
            let needle = format!("\"{}\"", r.id);
            let (line, column) = text
                .match_indices(&needle)
                .nth(1)
                .map(|(at, _)| {
                    let before = &text[..at];
                    (before.matches('\n').count() + 1, at - before.rfind('\n').map_or(0, |i| i + 1) + 1)
                })
                .unwrap_or((0, 0));
            return Err(RulesetError { line, column, message: format!("duplicate rule id {}", r.id) });
        }
    }
    Ok(rules)
}

/// Checks every rule target against the registry and every condition
/// variable against `known`.
pub fn check_rules(rules: &[Rule], registry: &Registry, known: impl Fn(&str) -> bool) -> Result<(), String> {
    for r in rules {
        if !registry.contains(&r.action.target) {
            return Err(format!("rule {}: unknown target {}", r.id, r.action.target));
        }
        let mut vars = BTreeSet::new();
        r.condition.vars(&mut vars);
        if let Some(v) = vars.iter().find(|v| !known(v)) {
            return Err(format!("rule {}: unknown variable {v}", r.id));
        }
    }
    Ok(())
}

/// Inputs for the built-in ruleset.
#[derive(Debug, Clone)]
pub struct RulesetParams {
    pub groups: Vec<String>,
    pub cooling_cm: Option<String>,
    pub humidity_cm: Option<String>,
    pub risk_trigger: f64,
    pub deviation_trigger: f64,
    /// Cooling is released once the temperature falls below this.
    pub release_temperature: f64,
}

pub fn risk_id(group: &str) -> String {
    format!("sensor_failure.{group}")
}

pub const MTTR_KPI: &str = "mttr_minutes";
pub const MAINTENANCE: &str = "maintenance";

pub fn default_ruleset(p: &RulesetParams) -> Vec<Rule> {
    use Condition as C;
    use DirectiveKind as K;
    let mut rules = Vec::new();
    if let Some(cm) = &p.cooling_cm {
        let active = format!("cm.{cm}.active");
        rules.push(Rule::new(
            "cooling_boost",
            C::All(vec![C::cmp(KPI_DEVIATION, Op::Gt, p.deviation_trigger), C::cmp(&active, Op::Lt, 1.0)]),
            K::ActivateCm,
            cm,
            90,
        ));
        rules.push(Rule::new(
            "cooling_release",
            C::All(vec![
                C::cmp(&active, Op::Ge, 1.0),
                C::cmp(KPI_TEMPERATURE, Op::Lt, p.release_temperature),
                C::cmp(format!("status.{KPI_DEVIATION}"), Op::Le, 0.0),
            ]),
            K::DeactivateCm,
            cm,
            10,
        ));
    }
    for g in &p.groups {
        rules.push(Rule::new(
            &format!("restore_{g}"),
            C::All(vec![C::cmp(spare_kpi(g), Op::Lt, 0.0), C::cmp(standby_kpi(g), Op::Ge, 1.0)]),
            K::ActivateCm,
            g,
            85,
        ));
        rules.push(Rule::new(
            &format!("redundancy_{g}"),
            C::All(vec![
                C::cmp(format!("risk.{}", risk_id(g)), Op::Gt, p.risk_trigger),
                C::cmp(spare_kpi(g), Op::Lt, 1.0),
                C::cmp(standby_kpi(g), Op::Ge, 1.0),
            ]),
            K::ActivateCm,
            g,
            80,
        ));
    }
    rules.push(Rule::new(
        "notify_maintenance",
        C::All(vec![C::cmp(format!("status.{MTTR_KPI}"), Op::Ge, 1.0), C::cmp(KPI_REPAIR_BACKLOG, Op::Ge, 1.0)]),
        K::NotifyMaintenance,
        MAINTENANCE,
        70,
    ));
    if let Some(cm) = &p.humidity_cm {
        let active = format!("cm.{cm}.active");
        rules.push(Rule::new(
            "humidity_guard",
            C::All(vec![C::cmp(format!("status.{KPI_HUMIDITY}"), Op::Ge, 1.0), C::cmp(&active, Op::Lt, 1.0)]),
            K::ActivateCm,
            cm,
            60,
        ));
        rules.push(Rule::new(
            "humidity_release",
            C::All(vec![C::cmp(format!("status.{KPI_HUMIDITY}"), Op::Le, 0.0), C::cmp(&active, Op::Ge, 1.0)]),
            K::DeactivateCm,
            cm,
            10,
        ));
    }
    rules
}
