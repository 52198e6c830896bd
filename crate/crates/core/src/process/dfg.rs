use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Directly-follows graph with activity, edge, start and end frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Dfg {
    pub activities: BTreeMap<String, u64>,
    pub edges: BTreeMap<(String, String), u64>,
    pub starts: BTreeMap<String, u64>,
    pub ends: BTreeMap<String, u64>,
    /// Number of nonempty traces.
    pub traces: u64,
}

/// Builds the DFG of a log. Empty traces are skipped.
pub fn discover_dfg<T: AsRef<[String]>>(traces: &[T]) -> Dfg {
    let mut dfg = Dfg::default();
    for t in traces {
        let t = t.as_ref();
        let (Some(first), Some(last)) = (t.first(), t.last()) else {
            continue;
        };
        dfg.traces += 1;
        *dfg.starts.entry(first.clone()).or_default() += 1;
        *dfg.ends.entry(last.clone()).or_default() += 1;
        for a in t {
            *dfg.activities.entry(a.clone()).or_default() += 1;
        }
        for w in t.windows(2) {
            *dfg.edges.entry((w[0].clone(), w[1].clone())).or_default() += 1;
        }
    }
    dfg
}

impl Dfg {
    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    /// Drops edges seen fewer than `min_freq` times. Activities, starts and
    /// ends are kept.
    pub fn filter_edges(&self, min_freq: u64) -> Dfg {
        let mut out = self.clone();
        out.edges.retain(|_, f| *f >= min_freq);
        out
    }

    pub fn successors<'a>(&'a self, a: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .keys()
            .filter(move |(x, _)| x == a)
            .map(|(_, y)| y.as_str())
    }

    /// Activities from which no end activity can be reached.
    pub fn dead_ends(&self) -> Vec<String> {
        let mut reach: BTreeSet<&str> = self.ends.keys().map(String::as_str).collect();
        let mut queue: VecDeque<&str> = reach.iter().copied().collect();
        while let Some(b) = queue.pop_front() {
            for (x, y) in self.edges.keys() {
                if y == b && reach.insert(x) {
                    queue.push_back(x);
                }
            }
        }
        self.activities
            .keys()
            .filter(|a| !reach.contains(a.as_str()))
            .cloned()
            .collect()
    }

    /// Edge list as CSV: `source,target,frequency`.
    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["source", "target", "frequency"])?;
        for ((a, b), f) in &self.edges {
            out.write_record([a.as_str(), b.as_str(), &f.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}
