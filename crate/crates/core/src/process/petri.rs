use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use super::Dfg;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Place {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub name: String,
    /// Activity label; `None` for silent transitions.
    pub label: Option<String>,
    /// Input places.
    pub pre: Vec<usize>,
    /// Output places.
    pub post: Vec<usize>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// A place/transition net with weight-one arcs and single-token initial and
/// final markings.
///
/// Arcs are stored on the transitions, so the net is bipartite by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PetriNet {
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    /// Place holding the single initial token.
    pub source: usize,
    /// Place holding the single final token.
    pub sink: usize,
}

impl PetriNet {
    /// A net with just a source and a sink place.
    pub fn new() -> Self {
        PetriNet {
            places: vec![
                Place {
                    name: "source".into(),
                },
                Place { name: "sink".into() },
            ],
            transitions: Vec::new(),
            source: 0,
            sink: 1,
        }
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> usize {
        self.places.push(Place { name: name.into() });
        self.places.len() - 1
    }

    pub fn add_transition(
        &mut self,
        name: impl Into<String>,
        label: Option<&str>,
        pre: &[usize],
        post: &[usize],
    ) -> usize {
        self.transitions.push(Transition {
            name: name.into(),
            label: label.map(str::to_owned),
            pre: pre.to_vec(),
            post: post.to_vec(),
        });
        self.transitions.len() - 1
    }

    pub fn num_arcs(&self) -> usize {
        self.transitions
            .iter()
            .map(|t| t.pre.len() + t.post.len())
            .sum()
    }

    pub fn visible(&self) -> impl Iterator<Item = (usize, &Transition)> {
        self.transitions.iter().enumerate().filter(|(_, t)| !t.is_silent())
    }

    pub fn transition_for(&self, label: &str) -> Option<usize> {
        self.transitions
            .iter()
            .position(|t| t.label.as_deref() == Some(label))
    }

    /// Labels of visible transitions, sorted.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.visible().filter_map(|(_, t)| t.label.as_deref()).collect()
    }

    /// Degree of every place then every transition.
    pub fn degrees(&self) -> Vec<usize> {
        let mut place_deg = vec![0; self.places.len()];
        for t in &self.transitions {
            for &p in t.pre.iter().chain(&t.post) {
                place_deg[p] += 1;
            }
        }
        place_deg
            .into_iter()
            .chain(self.transitions.iter().map(|t| t.pre.len() + t.post.len()))
            .collect()
    }

    /// Checks arc endpoints, distinct source and sink, and that every
    /// transition is reachable from the source along arcs.
    pub fn validate(&self) -> Result<()> {
        let np = self.places.len();
        if self.source >= np || self.sink >= np || self.source == self.sink {
            return Err(Error::arg("net needs distinct source and sink places"));
        }
        for t in &self.transitions {
            if let Some(&p) = t.pre.iter().chain(&t.post).find(|&&p| p >= np) {
                return Err(Error::arg(format!(
                    "transition {} refers to missing place {p}",
                    t.name
                )));
            }
        }
        let mut seen_place = vec![false; np];
        let mut seen_trans = vec![false; self.transitions.len()];
        seen_place[self.source] = true;
        let mut queue = VecDeque::from([self.source]);
        while let Some(p) = queue.pop_front() {
            for (i, t) in self.transitions.iter().enumerate() {
                if !seen_trans[i] && t.pre.contains(&p) {
                    seen_trans[i] = true;
                    for &q in &t.post {
                        if !seen_place[q] {
                            seen_place[q] = true;
                            queue.push_back(q);
                        }
                    }
                }
            }
        }
        if let Some(i) = seen_trans.iter().position(|s| !s) {
            return Err(Error::arg(format!(
                "transition {} is not reachable from the source",
                self.transitions[i].name
            )));
        }
        Ok(())
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph petri {\n  rankdir=LR;\n");
        for (i, p) in self.places.iter().enumerate() {
            let extra = if i == self.source {
                ", style=filled, fillcolor=lightgreen"
            } else if i == self.sink {
                ", style=filled, fillcolor=orange"
            } else {
                ""
            };
            let _ = writeln!(s, "  p{i} [shape=circle, label=\"\", xlabel=\"{}\"{extra}];", esc(&p.name));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            match &t.label {
                Some(l) => {
                    let _ = writeln!(s, "  t{i} [shape=box, label=\"{}\"];", esc(l));
                }
                None => {
                    let _ = writeln!(s, "  t{i} [shape=box, style=filled, fillcolor=black, label=\"\", width=0.15];");
                }
            }
            for p in &t.pre {
                let _ = writeln!(s, "  p{p} -> t{i};");
            }
            for p in &t.post {
                let _ = writeln!(s, "  t{i} -> p{p};");
            }
        }
        s.push_str("}\n");
        s
    }
}

impl Default for PetriNet {
    fn default() -> Self {
        Self::new()
    }
}

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Converts a DFG into a workflow net that accepts exactly its paths.
///
/// Every activity `a` gets a place `ready_a` before and `done_a` after its
/// labelled transition. Silent transitions route `source → ready_a` for start
/// activities, `done_a → ready_b` for each edge, and `done_a → sink` for end
/// activities, so a single token walks the graph.
pub fn dfg_to_petri(dfg: &Dfg) -> Result<PetriNet> {
    if dfg.is_empty() {
        return Err(Error::Empty("cannot convert an empty DFG".into()));
    }
    for a in dfg.dead_ends() {
        log::warn!("activity {a} cannot reach an end activity");
    }
    let mut net = PetriNet::new();
    let mut ready = std::collections::BTreeMap::new();
    let mut done = std::collections::BTreeMap::new();
    for a in dfg.activities.keys() {
        let r = net.add_place(format!("ready_{a}"));
        let d = net.add_place(format!("done_{a}"));
        net.add_transition(a.clone(), Some(a), &[r], &[d]);
        ready.insert(a.as_str(), r);
        done.insert(a.as_str(), d);
    }
    for a in dfg.starts.keys() {
        net.add_transition(format!("tau_start_{a}"), None, &[net.source], &[ready[a.as_str()]]);
    }
    for (a, b) in dfg.edges.keys() {
        net.add_transition(
            format!("tau_{a}_{b}"),
            None,
            &[done[a.as_str()]],
            &[ready[b.as_str()]],
        );
    }
    for a in dfg.ends.keys() {
        net.add_transition(format!("tau_end_{a}"), None, &[done[a.as_str()]], &[net.sink]);
    }
    Ok(net)
}
