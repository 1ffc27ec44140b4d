//! KPI series with bounded retention, moving averages, trend slopes and
//! z-score anomaly detection.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{KpiSample, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger values are worse.
    Above,
    /// Smaller values are worse.
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiDefinition {
    pub id: String,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub target: Option<f64>,
    pub direction: Direction,
    #[serde(default)]
    pub warn: Option<f64>,
    #[serde(default)]
    pub critical: Option<f64>,
    #[serde(default = "default_window")]
    pub window: u64,
}

fn default_window() -> u64 {
    10
}

impl KpiDefinition {
    pub fn plain(id: impl Into<String>, window: u64) -> Self {
        KpiDefinition {
            id: id.into(),
            unit: String::new(),
            target: None,
            direction: Direction::Above,
            warn: None,
            critical: None,
            window,
        }
    }

    /// Warn must lie between target and critical along the bad direction.
    pub fn check(&self) -> Result<(), String> {
        if self.window == 0 {
            return Err(format!("kpi {}: window must be positive", self.id));
        }
        let ordered = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(a), Some(b)) => match self.direction {
                Direction::Above => a <= b,
                Direction::Below => a >= b,
            },
            _ => true,
        };
        if !ordered(self.target, self.warn) || !ordered(self.warn, self.critical) || !ordered(self.target, self.critical) {
            return Err(format!("kpi {}: thresholds inconsistent with direction {:?}", self.id, self.direction));
        }
        Ok(())
    }

    pub fn status(&self, value: f64) -> ThresholdStatus {
        let worse = |v: f64, t: f64| match self.direction {
            Direction::Above => v > t,
            Direction::Below => v < t,
        };
        if self.critical.is_some_and(|c| worse(value, c)) {
            ThresholdStatus::Critical
        } else if self.warn.is_some_and(|w| worse(value, w)) {
            ThresholdStatus::Warn
        } else {
            ThresholdStatus::Ok
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Unknown,
    Ok,
    Warn,
    Critical,
}

impl ThresholdStatus {
    /// Numeric level used by rule conditions: unknown -1, ok 0, warn 1, critical 2.
    pub fn level(self) -> f64 {
        match self {
            ThresholdStatus::Unknown => -1.0,
            ThresholdStatus::Ok => 0.0,
            ThresholdStatus::Warn => 1.0,
            ThresholdStatus::Critical => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KpiError {
    #[error("series {0} is empty")]
    Empty(String),
    #[error("series {kpi}: sample at {at} does not follow {last}")]
    NotIncreasing { kpi: String, at: SimTime, last: SimTime },
    #[error("series {kpi}: query at {at} precedes first sample")]
    BeforeStart { kpi: String, at: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiSeries {
    pub definition: KpiDefinition,
    samples: VecDeque<(SimTime, f64)>,
    retention: usize,
}

impl KpiSeries {
    pub fn new(definition: KpiDefinition, retention: usize) -> Self {
        let retention = retention.max(definition.window as usize + 1);
        KpiSeries { definition, samples: VecDeque::with_capacity(retention), retention }
    }

    pub fn from_samples(definition: KpiDefinition, samples: &[(SimTime, f64)]) -> Result<Self, KpiError> {
        let mut s = KpiSeries::new(definition, samples.len().max(1));
        for &(t, v) in samples {
            s.push(t, v)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, at: SimTime, value: f64) -> Result<(), KpiError> {
        if let Some(&(last, _)) = self.samples.back() {
            if at <= last {
                return Err(KpiError::NotIncreasing { kpi: self.definition.id.clone(), at, last });
            }
        }
        if self.samples.len() == self.retention {
            self.samples.pop_front();
        }
        self.samples.push_back((at, value));
        Ok(())
    }

    pub fn samples(&self) -> impl Iterator<Item = &(SimTime, f64)> {
        self.samples.iter()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn latest(&self) -> Option<(SimTime, f64)> {
        self.samples.back().copied()
    }

    fn upto(&self, at: SimTime) -> usize {
        self.samples.partition_point(|(t, _)| *t <= at)
    }
}

/// Mean of the samples in `(at - window, at]`; falls back to the most
/// recent sample when that interval is empty.
pub fn moving_average(series: &KpiSeries, window: u64, at: SimTime) -> Result<f64, KpiError> {
    let first = series.samples.front().ok_or_else(|| KpiError::Empty(series.definition.id.clone()))?;
    if at < first.0 {
        return Err(KpiError::BeforeStart { kpi: series.definition.id.clone(), at });
    }
    let end = series.upto(at);
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(t, v) in series.samples.range(..end).rev() {
        if t.tick() + window <= at.tick() {
            break;
        }
        sum += v;
        n += 1;
    }
    if n == 0 {
        Ok(series.samples[end - 1].1)
    } else {
        Ok(sum / n as f64)
    }
}

/// Least-squares slope (units per tick) over `(at - window, at]`.
pub fn trend_slope(series: &KpiSeries, window: u64, at: SimTime) -> Option<f64> {
    let end = series.upto(at);
    let pts: Vec<(f64, f64)> = series
        .samples
        .range(..end)
        .filter(|(t, _)| t.tick() + window > at.tick())
        .map(|&(t, v)| (t.tick() as f64, v))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub kpi: String,
    pub at: SimTime,
    pub value: f64,
    pub mean: f64,
    /// `None` when the reference window has zero variance.
    pub z: Option<f64>,
    pub direction: Direction,
}

pub const DEFAULT_Z_CRIT: f64 = 3.0;

/// Z-score of the latest sample at or before `at` against the `window`
/// samples that precede it (population standard deviation).
pub fn detect_anomaly(series: &KpiSeries, at: SimTime, z_crit: f64) -> Option<AnomalyReport> {
    let window = series.definition.window as usize;
    let end = series.upto(at);
    if end < window + 1 || window == 0 {
        return None;
    }
    let (t_latest, latest) = series.samples[end - 1];
    let reference = series.samples.range(end - 1 - window..end - 1).map(|s| s.1);
    let n = window as f64;
    let mean = reference.clone().sum::<f64>() / n;
    let var = reference.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let direction = if latest >= mean { Direction::Above } else { Direction::Below };
    let report = |z| AnomalyReport {
        kpi: series.definition.id.clone(),
        at: t_latest,
        value: latest,
        mean,
        z,
        direction,
    };
    if var == 0.0 {
        (latest != mean).then(|| report(None))
    } else {
        let z = (latest - mean) / var.sqrt();
        (z.abs() >= z_crit).then(|| report(Some(z)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiStatus {
    pub latest: Option<f64>,
    pub moving_average: Option<f64>,
    pub status: ThresholdStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<AnomalyReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSnapshot {
    pub at: SimTime,
    pub kpis: BTreeMap<String, KpiStatus>,
}

impl KpiSnapshot {
    pub fn latest(&self, kpi: &str) -> Option<f64> {
        self.kpis.get(kpi).and_then(|k| k.latest)
    }

    pub fn status(&self, kpi: &str) -> ThresholdStatus {
        self.kpis.get(kpi).map_or(ThresholdStatus::Unknown, |k| k.status)
    }

    pub fn anomalies(&self) -> impl Iterator<Item = &AnomalyReport> {
        self.kpis.values().filter_map(|k| k.anomaly.as_ref())
    }

    pub fn set_latest(&mut self, kpi: &str, value: f64, status: ThresholdStatus) {
        self.kpis.insert(
            kpi.to_string(),
            KpiStatus { latest: Some(value), moving_average: Some(value), status, slope: None, anomaly: None },
        );
    }
}

/// All KPI series of a run keyed by id. Unregistered ids are auto-registered
/// with a plain definition on first sample.
#[derive(Debug, Clone)]
pub struct KpiStore {
    series: BTreeMap<String, KpiSeries>,
    pub z_crit: f64,
    pub default_window: u64,
    retention_factor: usize,
}

impl KpiStore {
    pub fn new(definitions: &[KpiDefinition], z_crit: f64, default_window: u64) -> Self {
        let mut store = KpiStore { series: BTreeMap::new(), z_crit, default_window, retention_factor: 4 };
        for d in definitions {
            store.define(d.clone());
        }
        store
    }

    fn retention(&self, def: &KpiDefinition) -> usize {
        self.retention_factor * def.window.max(self.default_window) as usize
    }

    /// Registers or replaces a definition, keeping existing samples.
    pub fn define(&mut self, def: KpiDefinition) {
        match self.series.get_mut(&def.id) {
            Some(s) => s.definition = def,
            None => {
                let r = self.retention(&def);
                self.series.insert(def.id.clone(), KpiSeries::new(def, r));
            }
        }
    }

    pub fn definition(&self, id: &str) -> Option<&KpiDefinition> {
        self.series.get(id).map(|s| &s.definition)
    }

    pub fn definitions(&self) -> impl Iterator<Item = &KpiDefinition> {
        self.series.values().map(|s| &s.definition)
    }

    pub fn series(&self, id: &str) -> Option<&KpiSeries> {
        self.series.get(id)
    }

    pub fn record(&mut self, sample: &KpiSample) -> Result<(), KpiError> {
        if !self.series.contains_key(&sample.kpi) {
            self.define(KpiDefinition::plain(sample.kpi.clone(), self.default_window));
        }
        self.series.get_mut(&sample.kpi).expect("registered above").push(sample.time, sample.value)
    }

    pub fn snapshot(&self, at: SimTime) -> KpiSnapshot {
        let mut kpis = BTreeMap::new();
        for (id, s) in &self.series {
            let def = &s.definition;
            let end = s.upto(at);
            let status = if end == 0 {
                KpiStatus {
                    latest: None,
                    moving_average: None,
                    status: ThresholdStatus::Unknown,
                    slope: None,
                    anomaly: None,
                }
            } else {
                let latest = s.samples[end - 1].1;
                KpiStatus {
                    latest: Some(latest),
                    moving_average: moving_average(s, def.window, at).ok(),
                    status: def.status(latest),
                    slope: trend_slope(s, def.window, at),
                    anomaly: detect_anomaly(s, at, self.z_crit),
                }
            };
            kpis.insert(id.clone(), status);
        }
        KpiSnapshot { at, kpis }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64], window: u64) -> KpiSeries {
        let pts: Vec<(SimTime, f64)> = values.iter().enumerate().map(|(i, v)| (SimTime(i as u64 + 1), *v)).collect();
        KpiSeries::from_samples(KpiDefinition::plain("x", window), &pts).unwrap()
    }

    #[test]
    fn window_reaching_before_zero_keeps_tick_zero() {
        let s = KpiSeries::from_samples(KpiDefinition::plain("x", 5), &[(SimTime(0), 1.0), (SimTime(2), 3.0)]).unwrap();
        assert_eq!(moving_average(&s, 5, SimTime(2)).unwrap(), 2.0);
        assert_eq!(moving_average(&s, 2, SimTime(2)).unwrap(), 3.0);
    }

    #[test]
    fn constant_series_average() {
        let s = series(&[2.5; 8], 3);
        for w in 1..10 {
            assert_eq!(moving_average(&s, w, SimTime(8)).unwrap(), 2.5);
        }
    }

    #[test]
    fn hand_computed_average() {
        let s = series(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(moving_average(&s, 2, SimTime(4)).unwrap(), 3.5);
        assert_eq!(moving_average(&s, 100, SimTime(4)).unwrap(), 2.5);
    }

    #[test]
    fn gap_falls_back_to_latest() {
        let s = KpiSeries::from_samples(KpiDefinition::plain("x", 2), &[(SimTime(1), 4.0), (SimTime(2), 6.0)]).unwrap();
        assert_eq!(moving_average(&s, 2, SimTime(10)).unwrap(), 6.0);
    }

    #[test]
    fn empty_series_is_error() {
        let s = KpiSeries::new(KpiDefinition::plain("x", 2), 8);
        assert!(matches!(moving_average(&s, 2, SimTime(1)), Err(KpiError::Empty(_))));
    }

    #[test]
    fn timestamps_must_increase() {
        let mut s = KpiSeries::new(KpiDefinition::plain("x", 2), 8);
        s.push(SimTime(3), 1.0).unwrap();
        assert!(s.push(SimTime(3), 1.0).is_err());
    }

    #[test]
    fn constant_latest_is_not_anomalous() {
        let s = series(&[10.0; 6], 5);
        assert!(detect_anomaly(&s, SimTime(6), 3.0).is_none());
    }

    #[test]
    fn zero_variance_shift_is_anomalous() {
        let mut v = vec![10.0; 5];
        v.push(10.1);
        let r = detect_anomaly(&series(&v, 5), SimTime(6), 3.0).unwrap();
        assert_eq!(r.z, None);
        assert_eq!(r.direction, Direction::Above);
    }

    #[test]
    fn hand_computed_z_score() {
        // mean 5, population sd 1, latest 9 -> z = 4
        let r = detect_anomaly(&series(&[4.0, 6.0, 4.0, 6.0, 9.0], 4), SimTime(5), 3.0).unwrap();
        assert!((r.z.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history_reports_nothing() {
        assert!(detect_anomaly(&series(&[1.0, 1.0, 50.0], 5), SimTime(3), 3.0).is_none());
    }

    #[test]
    fn slope_of_line() {
        let s = series(&[1.0, 3.0, 5.0, 7.0], 4);
        assert!((trend_slope(&s, 4, SimTime(4)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn retention_is_bounded() {
        let mut s = KpiSeries::new(KpiDefinition::plain("x", 2), 8);
        for t in 1..100 {
            s.push(SimTime(t), t as f64).unwrap();
        }
        assert_eq!(s.len(), 8);
    }

    fn def(id: &str, direction: Direction, warn: f64, critical: f64) -> KpiDefinition {
        KpiDefinition { warn: Some(warn), critical: Some(critical), direction, ..KpiDefinition::plain(id, 5) }
    }

    #[test]
    fn snapshot_statuses() {
        let mut store = KpiStore::new(
            &[
                def("cpu_utilisation", Direction::Above, 0.8, 0.9),
                def("sensor_availability", Direction::Below, 1.0, 0.95),
            ],
            3.0,
            10,
        );
        let snap = store.snapshot(SimTime(0));
        assert!(snap.kpis.values().all(|k| k.status == ThresholdStatus::Unknown));
        store.record(&KpiSample::new("cpu_utilisation", SimTime(1), 0.91)).unwrap();
        store.record(&KpiSample::new("sensor_availability", SimTime(1), 0.94)).unwrap();
        let snap = store.snapshot(SimTime(1));
        assert_eq!(snap.status("cpu_utilisation"), ThresholdStatus::Critical);
        assert_eq!(snap.status("sensor_availability"), ThresholdStatus::Critical);
    }

    #[test]
    fn inconsistent_thresholds_rejected() {
        assert!(def("d", Direction::Above, 9.0, 5.0).check().is_err());
        assert!(def("a", Direction::Below, 0.9, 0.95).check().is_err());
        assert!(def("a", Direction::Below, 1.0, 0.95).check().is_ok());
    }
}
