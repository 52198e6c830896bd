use std::collections::BTreeMap;

use serde::Serialize;

use super::LdaModel;

/// A topic with at least one member document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fingerprint {
    /// Zero-based topic index.
    pub topic: usize,
    /// Highest-probability terms, descending.
    pub top_terms: Vec<(String, f64)>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerprintReport {
    pub k: usize,
    pub fingerprints: Vec<Fingerprint>,
    /// Document id → topic.
    pub assignment: BTreeMap<String, usize>,
}

impl FingerprintReport {
    /// Number of distinct occupied topics.
    pub fn distinct(&self) -> usize {
        self.fingerprints.len()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Assigns each document to its most probable topic and describes every
/// occupied topic by its `top_n` terms.
pub fn extract_fingerprints(model: &LdaModel, top_n: usize) -> FingerprintReport {
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut assignment = BTreeMap::new();
    for (id, row) in model.doc_ids.iter().zip(&model.theta) {
        let t = argmax(row);
        members.entry(t).or_default().push(id.clone());
        assignment.insert(id.clone(), t);
    }
    let fingerprints = members
        .into_iter()
        .map(|(topic, members)| Fingerprint {
            topic,
            top_terms: model.top_terms(topic, top_n),
            members,
        })
        .collect();
    FingerprintReport {
        k: model.k,
        fingerprints,
        assignment,
    }
}
