//! Process discovery and conformance: directly-follows graphs, their Petri
//! net translation, token replay and the four quality dimensions.

mod dfg;
mod petri;
mod replay;

use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::eventlog::{EventLog, Session};

pub use dfg::{discover_dfg, Dfg};
pub use petri::{dfg_to_petri, PetriNet, Place, Transition};
pub use replay::{
    generalization, precision_escaping, replay, replay_fitness, simplicity, Replay, TraceReplay,
    MAX_SILENT_HOPS,
};

/// One row of model quality figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityMetrics {
    pub fitness: f64,
    pub precision: f64,
    pub generalization: f64,
    pub simplicity: f64,
    pub average: f64,
    pub interactions: u64,
    #[serde(serialize_with = "ser_duration")]
    pub duration: Duration,
}

impl QualityMetrics {
    /// Assembles a row; `average` is the mean of the four components.
    pub fn new(
        fitness: f64,
        precision: f64,
        generalization: f64,
        simplicity: f64,
        interactions: u64,
        duration: Duration,
    ) -> Self {
        QualityMetrics {
            fitness,
            precision,
            generalization,
            simplicity,
            average: (fitness + precision + generalization + simplicity) / 4.0,
            interactions,
            duration,
        }
    }
}

/// `HH:MM:SS`, truncated to whole seconds.
pub fn format_duration(d: Duration) -> String {
    let s = d.as_secs();
    format!("{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

fn ser_duration<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_duration(*d))
}

/// Activity sequence of each session.
pub fn traces(sessions: &[Session]) -> Vec<Vec<String>> {
    sessions
        .iter()
        .map(|s| s.activities().map(str::to_owned).collect())
        .collect()
}

/// Scores `net` against `traces`. `duration` covers only this evaluation.
pub fn quality<T: AsRef<[String]>>(
    net: &PetriNet,
    traces: &[T],
    interactions: u64,
) -> Result<QualityMetrics> {
    let start = Instant::now();
    let rep = replay(net, traces);
    let precision = precision_escaping(net, traces);
    let gen = generalization(net, &rep)?;
    let simp = simplicity(net)?;
    Ok(QualityMetrics::new(
        rep.fitness(),
        precision,
        gen,
        simp,
        interactions,
        start.elapsed(),
    ))
}

/// A discovered model and its quality on the log it came from.
#[derive(Debug, Clone, Serialize)]
pub struct ProcessModel {
    pub dfg: Dfg,
    pub net: PetriNet,
    pub metrics: QualityMetrics,
}

/// Discovers a DFG-based net from `traces` and evaluates it on the same log.
/// `duration` covers discovery and evaluation.
pub fn discover_and_evaluate<T: AsRef<[String]>>(
    traces: &[T],
    interactions: u64,
    min_edge_freq: u64,
) -> Result<ProcessModel> {
    let start = Instant::now();
    let dfg = discover_dfg(traces).filter_edges(min_edge_freq);
    let net = dfg_to_petri(&dfg)?;
    let mut metrics = quality(&net, traces, interactions)?;
    metrics.duration = start.elapsed();
    Ok(ProcessModel { dfg, net, metrics })
}

/// Number of events recorded for `case`: IDE commands plus judge
/// submissions.
pub fn interactions_count(log: &EventLog, case: &str) -> Result<u64> {
    let sessions = log.case(case);
    if sessions.is_empty() {
        return Err(Error::UnknownCase(case.to_owned()));
    }
    Ok(sessions.iter().map(|s| s.len() as u64).sum())
}

#[cfg(test)]
mod tests;
