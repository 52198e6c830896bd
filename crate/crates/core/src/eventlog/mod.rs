//! Event logs of IDE commands and judge submissions.
//!
//! Raw records arrive as JSON (an array or JSON lines) in the PyCharm plugin
//! format. Each record becomes an [`Event`]; events are grouped into
//! [`Session`]s by a case key (the `username` field unless told otherwise),
//! and sessions project onto token sentences for the language and topic
//! models.

mod activity_map;
mod canonical;
mod hash;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use activity_map::{ActivityMap, ActivityRule, PatternField, ACTIVITY_LABELS, SPURIOUS};
pub use canonical::{read_canonical, write_canonical_csv, write_canonical_jsonl};
pub use hash::{canonical_string, event_digest, verify_hashes, TamperReport, Verdict};

/// Fields every input record must carry.
pub const REQUIRED_FIELDS: [&str; 5] = [
    "session",
    "timestamp_begin",
    "username",
    "categoryName",
    "commandName",
];

pub const DEFAULT_CASE_KEY: &str = "username";

/// One development action: an activity name, the case it belongs to, when it
/// happened and every other field of the source record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub case_id: String,
    pub timestamp: DateTime<Utc>,
    /// All non-hash fields of the source record, keyed by field name.
    pub attributes: BTreeMap<String, String>,
    pub hash: Option<String>,
    /// Position in the input stream; used for stable ordering and dedup.
    pub seq: usize,
}

impl Event {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    pub fn command(&self) -> Option<&str> {
        self.attr("commandName")
    }

    pub fn category(&self) -> Option<&str> {
        self.attr("categoryName")
    }

    /// The token this event contributes at the given granularity.
    pub fn token(&self, level: Level) -> Option<&str> {
        match level {
            Level::Command => self.command(),
            Level::Category => self.category(),
            Level::Activity => Some(&self.activity),
        }
    }
}

/// A non-empty, time-ordered trace of events sharing one case id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.activity.as_str())
    }
}

/// Token granularity used when projecting sessions onto sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Command,
    Category,
    Activity,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Command, Level::Category, Level::Activity];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Command => "command",
            Level::Category => "category",
            Level::Activity => "activity",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "command" => Ok(Level::Command),
            "category" => Ok(Level::Category),
            "activity" => Ok(Level::Activity),
            other => Err(Error::arg(format!("unknown level `{other}`"))),
        }
    }
}

/// Ordered set of distinct tokens with a bijective index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    level: Level,
}

impl Vocabulary {
    pub fn new(level: Level) -> Self {
        Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            level,
        }
    }

    /// Builds a vocabulary from tokens in first-seen order.
    pub fn from_tokens<'a, I>(level: Level, tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Vocabulary::new(level);
        for t in tokens {
            vocab.insert(t);
        }
        vocab
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// A set of sessions plus the activity vocabulary derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub sessions: Vec<Session>,
    pub vocabulary: Vocabulary,
}

impl EventLog {
    pub fn from_sessions(sessions: Vec<Session>) -> Self {
        let vocabulary = Vocabulary::from_tokens(
            Level::Activity,
            sessions.iter().flat_map(|s| s.activities()),
        );
        EventLog {
            sessions,
            vocabulary,
        }
    }

    /// Groups events by `case_key`; see [`sessionize`].
    pub fn from_events(events: Vec<Event>, case_key: &str) -> Result<Self> {
        Ok(Self::from_sessions(group_events(events, case_key)?))
    }

    pub fn empty() -> Self {
        Self::from_sessions(Vec::new())
    }

    pub fn num_events(&self) -> usize {
        self.sessions.iter().map(Session::len).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.sessions.iter().flat_map(|s| s.events.iter())
    }

    /// All events, in input order.
    pub fn events_in_input_order(&self) -> Vec<&Event> {
        let mut all: Vec<&Event> = self.events().collect();
        all.sort_by_key(|e| e.seq);
        all
    }

    pub fn case_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.sessions.iter().map(|s| s.case_id.as_str()).collect();
        ids.dedup();
        ids
    }

    /// Sessions belonging to one case.
    pub fn case(&self, case_id: &str) -> Vec<&Session> {
        self.sessions
            .iter()
            .filter(|s| s.case_id == case_id)
            .collect()
    }
}

/// A record rejected during parsing; parsing continues past it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub record: usize,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "record {} (byte {}): {}",
            self.record, self.offset, self.message
        )
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub log: EventLog,
    pub rejected: Vec<RecordError>,
}

/// Parses JSON event records (a JSON array or JSON lines) into a log grouped
/// by `case_key`.
///
/// Records missing a required field, or with a bad timestamp, are collected
/// in [`ParseOutcome::rejected`]. Malformed JSON aborts with the byte offset of
/// the problem, and so does input where every record is rejected.
pub fn parse_events(input: &[u8], case_key: &str) -> Result<ParseOutcome> {
    let records = split_records(input)?;
    let mut events = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for (i, (offset, value)) in records.iter().enumerate() {
        match event_from_record(value, i, case_key) {
            Ok(e) => events.push(e),
            Err(message) => rejected.push(RecordError {
                record: i,
                offset: *offset,
                message,
            }),
        }
    }
    if events.is_empty() && !rejected.is_empty() {
        return Err(Error::NoValidRecords {
            rejected: rejected.len(),
            first: rejected[0].to_string(),
        });
    }
    let log = EventLog::from_events(events, case_key)?;
    Ok(ParseOutcome { log, rejected })
}

fn split_records(input: &[u8]) -> Result<Vec<(usize, Value)>> {
    let first = input.iter().position(|b| !b.is_ascii_whitespace());
    let Some(start) = first else {
        return Ok(Vec::new());
    };
    if input[start] == b'[' {
        let value: Value = serde_json::from_slice(input).map_err(|e| json_error(input, 0, &e))?;
        let Value::Array(items) = value else {
            unreachable!("input starts with '['");
        };
        // Offsets inside an array are not tracked per element; report the
        // array start for record-level problems.
        return Ok(items.into_iter().map(|v| (start, v)).collect());
    }
    // JSON lines, or any whitespace-separated stream of objects.
    let mut out = Vec::new();
    let mut stream = serde_json::Deserializer::from_slice(input).into_iter::<Value>();
    loop {
        let at = stream.byte_offset();
        match stream.next() {
            None => break,
            Some(Ok(v)) => {
                let skip = input[at..].iter().take_while(|b| b.is_ascii_whitespace()).count();
                out.push((at + skip, v));
            }
            Some(Err(e)) => return Err(json_error(input, 0, &e)),
        }
    }
    Ok(out)
}

fn json_error(buf: &[u8], base: usize, err: &serde_json::Error) -> Error {
    let mut offset = 0;
    let mut line = 1;
    for (i, &b) in buf.iter().enumerate() {
        if line == err.line() {
            offset = i;
            break;
        }
        if b == b'\n' {
            line += 1;
            offset = i + 1;
        }
    }
    let offset = (offset + err.column().saturating_sub(1)).min(buf.len());
    Error::Parse {
        offset: base + offset,
        message: err.to_string(),
    }
}

fn value_to_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn event_from_record(
    value: &Value,
    seq: usize,
    case_key: &str,
) -> std::result::Result<Event, String> {
    let Value::Object(map) = value else {
        return Err("record is not a JSON object".into());
    };
    let mut attributes = BTreeMap::new();
    let mut hash = None;
    for (k, v) in map {
        if k == "hash" {
            if !v.is_null() {
                hash = Some(value_to_string(v));
            }
            continue;
        }
        attributes.insert(k.clone(), value_to_string(v));
    }
    for field in REQUIRED_FIELDS {
        match map.get(field) {
            None | Some(Value::Null) => return Err(format!("missing required field `{field}`")),
            _ => {}
        }
    }
    let ts = &attributes["timestamp_begin"];
    let timestamp = parse_timestamp(ts).ok_or_else(|| format!("bad timestamp `{ts}`"))?;
    let case_id = attributes
        .get(case_key)
        .cloned()
        .ok_or_else(|| format!("missing case key `{case_key}`"))?;
    if case_id.is_empty() {
        return Err(format!("empty case key `{case_key}`"));
    }
    Ok(Event {
        activity: attributes["commandName"].clone(),
        case_id,
        timestamp,
        attributes,
        hash,
        seq,
    })
}

/// Parses an ISO-8601 timestamp; naive timestamps are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 2] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"];
    NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

fn group_events(events: Vec<Event>, case_key: &str) -> Result<Vec<Session>> {
    let mut groups: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for mut e in events {
        let key = if case_key == "case_id" {
            e.case_id.clone()
        } else {
            match e.attributes.get(case_key) {
                Some(k) => k.clone(),
                None => {
                    return Err(Error::MissingCaseKey {
                        seq: e.seq,
                        activity: e.activity,
                        key: case_key.to_owned(),
                    })
                }
            }
        };
        e.case_id = key.clone();
        groups.entry(key).or_default().push(e);
    }
    Ok(groups
        .into_iter()
        .map(|(case_id, mut events)| {
            events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.seq.cmp(&b.seq)));
            Session { case_id, events }
        })
        .collect())
}

/// Regroups every event of `log` into one session per distinct value of the
/// `case_key` attribute. Sessions come out sorted by case id; events by
/// timestamp, ties broken by input order.
pub fn sessionize(log: &EventLog, case_key: &str) -> Result<Vec<Session>> {
    group_events(log.events().cloned().collect(), case_key)
}

/// Drops every event whose `(username, timestamp)` pair was already seen,
/// scanning in input order.
pub fn dedupe(log: &EventLog) -> EventLog {
    let mut seen: HashSet<(String, i64)> = HashSet::new();
    let mut keep: HashSet<usize> = HashSet::new();
    for e in log.events_in_input_order() {
        let user = e.attr("username").unwrap_or(&e.case_id).to_owned();
        if seen.insert((user, e.timestamp.timestamp_millis())) {
            keep.insert(e.seq);
        }
    }
    let sessions = log
        .sessions
        .iter()
        .filter_map(|s| {
            let events: Vec<Event> = s
                .events
                .iter()
                .filter(|e| keep.contains(&e.seq))
                .cloned()
                .collect();
            (!events.is_empty()).then(|| Session {
                case_id: s.case_id.clone(),
                events,
            })
        })
        .collect();
    EventLog::from_sessions(sessions)
}

/// Replaces each event's activity with the label of the first matching rule.
/// The original command stays available as the `commandName` attribute.
pub fn recode_activities(log: &EventLog, map: &ActivityMap) -> EventLog {
    let sessions = log
        .sessions
        .iter()
        .map(|s| Session {
            case_id: s.case_id.clone(),
            events: s
                .events
                .iter()
                .map(|e| Event {
                    activity: map.label(e).to_owned(),
                    ..e.clone()
                })
                .collect(),
        })
        .collect();
    EventLog::from_sessions(sessions)
}

/// Token sentences, one per session, with the vocabulary built over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
    pub vocabulary: Vocabulary,
}

impl Corpus {
    pub fn new(level: Level, sentences: Vec<Vec<String>>) -> Self {
        let vocabulary = Vocabulary::from_tokens(
            level,
            sentences.iter().flat_map(|s| s.iter().map(String::as_str)),
        );
        Corpus {
            sentences,
            vocabulary,
        }
    }

    /// Convenience constructor from string slices, at the activity level.
    pub fn from_strs(sentences: &[&[&str]]) -> Self {
        Self::new(
            Level::Activity,
            sentences
                .iter()
                .map(|s| s.iter().map(|t| t.to_string()).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn level(&self) -> Level {
        self.vocabulary.level()
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus::new(
            self.level(),
            indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        )
    }
}

/// Projects sessions onto token sentences at the requested granularity.
///
/// Events lacking the attribute for `level` are an error.
pub fn to_sentences(sessions: &[Session], level: Level) -> Result<Corpus> {
    let mut sentences = Vec::with_capacity(sessions.len());
    for s in sessions {
        let mut sentence = Vec::with_capacity(s.len());
        for e in &s.events {
            let token = e.token(level).ok_or_else(|| {
                Error::arg(format!(
                    "event #{} has no {} attribute",
                    e.seq,
                    level.as_str()
                ))
            })?;
            sentence.push(token.to_owned());
        }
        sentences.push(sentence);
    }
    Ok(Corpus::new(level, sentences))
}

#[cfg(test)]
mod tests;
