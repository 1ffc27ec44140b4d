//! Cross-cutting data and information flow: event bus, trace log and KPI
//! statistics.

pub mod bus;
pub mod event;
pub mod kpi;

pub use bus::{read_jsonl, to_jsonl, write_jsonl, Bus, SubscriberId, TopicPattern, TraceError};
pub use event::{Event, Payload};
pub use kpi::{
    detect_anomaly, moving_average, trend_slope, AnomalyReport, Direction, KpiDefinition, KpiSeries, KpiSnapshot,
    KpiStatus, KpiStore, ThresholdStatus,
};
