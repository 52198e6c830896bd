//! The canonical log: one JSON object per event, one event per line.
//!
//! ```text
//! {"case_id":"87788","timestamp":"2020-09-18T09:00:06.054Z","activity":"Executing",
//!  "seq":0,"hash":"…","attributes":{"categoryName":"NavBarToolbar",…}}
//! ```
//!
//! Sessions are written in case order and events in session order, so reading
//! the file back reproduces the same grouping.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{format_timestamp, parse_timestamp, Event, EventLog, Session};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CanonicalEvent {
    case_id: String,
    timestamp: String,
    activity: String,
    seq: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
    attributes: BTreeMap<String, String>,
}

pub fn write_canonical_jsonl<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    for e in log.events() {
        let rec = CanonicalEvent {
            case_id: e.case_id.clone(),
            timestamp: format_timestamp(&e.timestamp),
            activity: e.activity.clone(),
            seq: e.seq,
            hash: e.hash.clone(),
            attributes: e.attributes.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// `case_id,timestamp,activity,command,category`
pub fn write_canonical_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case_id", "timestamp", "activity", "command", "category"])?;
    for e in log.events() {
        w.write_record([
            e.case_id.as_str(),
            &format_timestamp(&e.timestamp),
            &e.activity,
            e.command().unwrap_or(""),
            e.category().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_canonical<R: BufRead>(input: R) -> Result<EventLog> {
    let mut sessions: Vec<Session> = Vec::new();
    let mut offset = 0;
    for line in input.lines() {
        let line = line?;
        let start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CanonicalEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
            offset: start + e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&rec.timestamp).ok_or_else(|| Error::Parse {
            offset: start,
            message: format!("bad timestamp `{}`", rec.timestamp),
        })?;
        let event = Event {
            activity: rec.activity,
            case_id: rec.case_id,
            timestamp,
            attributes: rec.attributes,
            hash: rec.hash,
            seq: rec.seq,
        };
        match sessions.last_mut() {
            Some(s) if s.case_id == event.case_id => s.events.push(event),
            _ => sessions.push(Session {
                case_id: event.case_id.clone(),
                events: vec![event],
            }),
        }
    }
    Ok(EventLog::from_sessions(sessions))
}
