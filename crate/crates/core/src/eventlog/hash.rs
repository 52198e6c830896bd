use std::collections::BTreeMap;

use md5::{Digest, Md5};
use serde::Serialize;

use super::EventLog;

/// Canonical serialization of a record for tamper checks: `key=value` for
/// every non-hash field in lexicographic key order, joined by `|`.
pub fn canonical_string(fields: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        out.push_str(k);
        out.push('=');
        out.push_str(v);
    }
    out
}

/// Lowercase hex MD5 of `secret` followed by the canonical serialization.
pub fn event_digest(fields: &BTreeMap<String, String>, secret: &[u8]) -> String {
    let mut h = Md5::new();
    h.update(secret);
    h.update(canonical_string(fields).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    HashMismatch,
    HashMissing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TamperReport {
    /// `(event seq, verdict)` in input order.
    pub verdicts: Vec<(usize, Verdict)>,
    pub ok: usize,
    pub mismatched: usize,
    pub missing: usize,
}

impl TamperReport {
    pub fn total(&self) -> usize {
        self.verdicts.len()
    }

    pub fn tampered(&self) -> usize {
        self.mismatched
    }
}

/// Recomputes every event's digest and compares it with the stored hash.
pub fn verify_hashes(log: &EventLog, secret: &[u8]) -> TamperReport {
    let mut report = TamperReport {
        verdicts: Vec::with_capacity(log.num_events()),
        ok: 0,
        mismatched: 0,
        missing: 0,
    };
    for e in log.events_in_input_order() {
        let verdict = match &e.hash {
            None => Verdict::HashMissing,
            Some(stored) if stored.eq_ignore_ascii_case(&event_digest(&e.attributes, secret)) => {
                Verdict::Ok
            }
            Some(_) => Verdict::HashMismatch,
        };
        match verdict {
            Verdict::Ok => report.ok += 1,
            Verdict::HashMismatch => report.mismatched += 1,
            Verdict::HashMissing => report.missing += 1,
        }
        report.verdicts.push((e.seq, verdict));
    }
    report
}
