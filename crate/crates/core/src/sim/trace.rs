use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assembly::{Actor, StepStatus};
use crate::dialogue::Speaker;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Timeout,
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndReason::Completed => "completed",
            EndReason::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotEventKind {
    /// Mode changed without an action boundary (idle, blocked).
    Mode,
    Started,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordBody {
    Utterance {
        speaker: Speaker,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<String>,
    },
    Robot {
        event: RobotEventKind,
        /// Mode after the event.
        mode: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Step {
        step: String,
        actor: Actor,
        status: StepStatus,
    },
    Dialogue {
        outcome: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    SimEnd {
        reason: EndReason,
        dropped_events: u64,
    },
}

/// One line of the trace stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub t: SimTime,
    #[serde(flatten)]
    pub body: RecordBody,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    /// Appends a record with the next sequence number.
    pub fn push(&mut self, t: SimTime, body: RecordBody) -> &TraceRecord {
        let seq = self.records.last().map_or(0, |r| r.seq + 1);
        self.records.push(TraceRecord { seq, t, body });
        self.records.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn end(&self) -> Option<(SimTime, EndReason)> {
        match self.records.last() {
            Some(TraceRecord {
                t,
                body: RecordBody::SimEnd { reason, .. },
                ..
            }) => Some((*t, *reason)),
            _ => None,
        }
    }

    pub fn since(&self, seq: u64) -> &[TraceRecord] {
        let start = self.records.partition_point(|r| r.seq < seq);
        &self.records[start..]
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, TraceParseError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(line).map_err(|source| TraceParseError::Json { line: i + 1, source })?;
            records.push(r);
        }
        Ok(Trace { records })
    }

    /// User and robot lines, in order.
    pub fn utterances(&self) -> impl Iterator<Item = (SimTime, Speaker, &str)> {
        self.records.iter().filter_map(|r| match &r.body {
            RecordBody::Utterance { speaker, text, .. } => Some((r.t, *speaker, text.as_str())),
            _ => None,
        })
    }
}
