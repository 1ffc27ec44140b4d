//! Trace verification: re-run the simulation from the header stored in the
//! trace and compare event by event, then re-derive every snapshot's KPI
//! figures from the raw samples in the trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::flow::bus::to_jsonl;
use crate::flow::event::{Event, Payload};
use crate::scenario::{RunHeader, FORMAT_VERSION};
use crate::sim::{run, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass { events: usize },
    Fail { seq: u64, reason: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("trace is empty")]
    Empty,
    #[error("first trace line is not a run header")]
    NoHeader,
    #[error("trace format v{found} is not supported (expected v{FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn header_of(text: &str) -> Result<RunHeader, ReplayError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or(ReplayError::Empty)?;
    let e: Event = serde_json::from_str(first).map_err(|e| ReplayError::Parse { line: 1, message: e.to_string() })?;
    match e.payload {
        Payload::RunStarted(h) if h.format_version == FORMAT_VERSION => Ok(*h),
        Payload::RunStarted(h) => Err(ReplayError::Version { found: h.format_version }),
        _ => Err(ReplayError::NoHeader),
    }
}

/// Checks a JSONL trace. The re-run works on the header alone, so any
/// variant replays; the first line that differs names the divergent seq.
pub fn replay(text: &str) -> Result<Verdict, ReplayError> {
    let header = header_of(text)?;
    let expected = match run(&header) {
        Ok(out) => out.trace,
        Err(SimError::Invariant { trace, .. }) => trace,
    };
    let fresh = to_jsonl(&expected);
    let mut fresh_lines = fresh.lines();
    let mut count = 0;
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        match fresh_lines.next() {
            Some(f) if f == line.trim_end() => count += 1,
            Some(_) => return Ok(Verdict::Fail { seq: i as u64, reason: "event differs from re-simulation".into() }),
            None => return Ok(Verdict::Fail { seq: i as u64, reason: "event beyond the end of the re-simulated run".into() }),
        }
    }
    if fresh_lines.next().is_some() {
        return Ok(Verdict::Fail { seq: count as u64, reason: "trace ends early".into() });
    }
    let events: Vec<Event> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ReplayError::Parse { line: i + 1, message: e.to_string() }))
        .collect::<Result<_, _>>()?;
    if let Some((seq, reason)) = check_kpi_math(&header, &events) {
        return Ok(Verdict::Fail { seq, reason });
    }
    Ok(Verdict::Pass { events: count })
}

/// Recomputes latest value and moving average of every KPI in every
/// snapshot from the sample events. Returns the first snapshot that
/// disagrees.
pub fn check_kpi_math(header: &RunHeader, trace: &[Event]) -> Option<(u64, String)> {
    let windows: BTreeMap<String, u64> = header.scenario.kpi_definitions().into_iter().map(|d| (d.id, d.window)).collect();
    let mut samples: BTreeMap<&str, Vec<(u64, f64)>> = BTreeMap::new();
    for e in trace {
        match &e.payload {
            Payload::Kpi(s) => samples.entry(s.kpi.as_str()).or_default().push((s.time.tick(), s.value)),
            Payload::Snapshot(snap) => {
                let at = snap.at.tick();
                for (id, st) in &snap.kpis {
                    let series: Vec<(u64, f64)> =
                        samples.get(id.as_str()).map(|v| v.iter().copied().filter(|(t, _)| *t <= at).collect()).unwrap_or_default();
                    let latest = series.last().map(|s| s.1);
                    if latest != st.latest {
                        return Some((e.seq, format!("latest {id} is {:?}, samples give {latest:?}", st.latest)));
                    }
                    let Some(last) = latest else { continue };
                    let w = windows.get(id).copied().unwrap_or(10);
                    let inside: Vec<f64> = series.iter().filter(|(t, _)| *t + w > at).map(|s| s.1).collect();
                    let ma = if inside.is_empty() { last } else { inside.iter().sum::<f64>() / inside.len() as f64 };
                    match st.moving_average {
                        Some(m) if (m - ma).abs() <= 1e-9 * ma.abs().max(1.0) => {}
                        other => return Some((e.seq, format!("moving average of {id} is {other:?}, samples give {ma}"))),
                    }
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acl::AclVariant;
    use crate::scenario::Scenario;
    use std::collections::BTreeSet;

    fn short_trace(acl: AclVariant) -> String {
        let mut s = Scenario::reference();
        s.ticks = 60;
        let h = RunHeader::new(s, 9, acl, BTreeSet::new());
        to_jsonl(&run(&h).unwrap().trace)
    }

    #[test]
    fn untouched_trace_passes() {
        for acl in [AclVariant::Off, AclVariant::Kpi] {
            assert!(replay(&short_trace(acl)).unwrap().passed());
        }
    }

    #[test]
    fn mutated_sample_names_its_seq() {
        let text = short_trace(AclVariant::Rules);
        let lines: Vec<&str> = text.lines().collect();
        let idx = lines.iter().position(|l| l.contains("\"topic\":\"kpi.temperature\"")).unwrap();
        let e: Event = serde_json::from_str(lines[idx]).unwrap();
        let Payload::Kpi(mut s) = e.payload.clone() else { panic!() };
        s.value += 0.5;
        let mutated = serde_json::to_string(&Event { payload: Payload::Kpi(s), ..e }).unwrap();
        let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        out[idx] = mutated;
        match replay(&out.join("\n")).unwrap() {
            Verdict::Fail { seq, .. } => assert_eq!(seq, idx as u64),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn header_is_required() {
        let text = short_trace(AclVariant::Off);
        let rest: Vec<&str> = text.lines().skip(1).collect();
        assert!(matches!(replay(&rest.join("\n")), Err(ReplayError::NoHeader)));
        assert!(matches!(replay(""), Err(ReplayError::Empty)));
    }
}
