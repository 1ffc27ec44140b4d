//! Synchronous topic bus with per-subscriber mailboxes and an append-only
//! trace of every published event.
//!
//! Subscribers never run inside `publish`; events land in their mailbox and
//! are drained by the owner between steps, so publishing while handling a
//! drained event is always safe and keeps seq order.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use crate::model::{LayerId, SimTime};

use super::event::{Event, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriberId(pub u32);

/// Dotted topic pattern: exact segments, optionally ending in `*` which
/// matches one or more trailing segments. A bare `*` matches everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPattern(String);

impl TopicPattern {
    pub fn new(p: impl Into<String>) -> Self {
        TopicPattern(p.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, topic: &str) -> bool {
        let p = self.0.as_str();
        if p == "*" {
            return !topic.is_empty();
        }
        match p.strip_suffix(".*") {
            Some(prefix) => topic.len() > prefix.len() + 1 && topic.starts_with(prefix) && topic.as_bytes()[prefix.len()] == b'.',
            None => p == topic,
        }
    }
}

#[derive(Debug, Default)]
pub struct Bus {
    next_seq: u64,
    patterns: Vec<TopicPattern>,
    subscriptions: Vec<(usize, SubscriberId)>,
    next_subscriber: u32,
    inboxes: BTreeMap<SubscriberId, VecDeque<Event>>,
    log: Vec<Event>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_subscriber(&mut self) -> SubscriberId {
        let id = SubscriberId(self.next_subscriber);
        self.next_subscriber += 1;
        self.inboxes.insert(id, VecDeque::new());
        id
    }

    pub fn subscribe(&mut self, who: SubscriberId, pattern: &str) {
        let idx = match self.patterns.iter().position(|p| p.as_str() == pattern) {
            Some(i) => i,
            None => {
                self.patterns.push(TopicPattern::new(pattern));
                self.patterns.len() - 1
            }
        };
        if !self.subscriptions.contains(&(idx, who)) {
            self.subscriptions.push((idx, who));
            self.subscriptions.sort();
        }
    }

    /// Assigns the next seq, appends to the trace and delivers to every
    /// matching subscriber once, in pattern-registration then subscriber-id
    /// order. Returns the delivery order.
    pub fn publish(&mut self, topic: impl Into<String>, source: LayerId, time: SimTime, payload: Payload) -> (u64, Vec<SubscriberId>) {
        let topic = topic.into();
        let event = Event { seq: self.next_seq, topic, source, time, payload };
        self.next_seq += 1;
        let mut delivered: Vec<SubscriberId> = Vec::new();
        for &(idx, who) in &self.subscriptions {
            if self.patterns[idx].matches(&event.topic) && !delivered.contains(&who) {
                delivered.push(who);
            }
        }
        for who in &delivered {
            self.inboxes.get_mut(who).expect("subscriber has inbox").push_back(event.clone());
        }
        let seq = event.seq;
        self.log.push(event);
        (seq, delivered)
    }

    pub fn drain(&mut self, who: SubscriberId) -> Vec<Event> {
        self.inboxes.get_mut(&who).map(|q| q.drain(..).collect()).unwrap_or_default()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn trace(&self) -> &[Event] {
        &self.log
    }

    pub fn into_trace(self) -> Vec<Event> {
        self.log
    }

    pub fn contains_seq(&self, seq: u64) -> bool {
        seq < self.next_seq
    }
}

/// Canonical JSON Lines encoding of a trace.
pub fn write_jsonl<W: Write>(mut out: W, events: &[Event]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl(events: &[Event]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("trace line {line}: seq {seq} breaks the gap-free sequence")]
    Gap { line: usize, seq: u64 },
}

pub fn read_jsonl(text: &str) -> Result<Vec<Event>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: Event = serde_json::from_str(line).map_err(|source| TraceError::Parse { line: i + 1, source })?;
        if e.seq != out.len() as u64 {
            return Err(TraceError::Gap { line: i + 1, seq: e.seq });
        }
        out.push(e);
    }
    Ok(out)
}
