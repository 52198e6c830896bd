//! Token-based replay and the conformance measures built on it.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use super::PetriNet;
use crate::error::{Error, Result};

/// Longest chain of silent transitions tried to enable a visible one.
pub const MAX_SILENT_HOPS: usize = 10;

type Marking = Vec<u32>;

fn is_enabled(net: &PetriNet, m: &Marking, t: usize) -> bool {
    let pre = &net.transitions[t].pre;
    pre.iter()
        .all(|&p| m[p] as usize >= pre.iter().filter(|&&q| q == p).count())
}

fn fire(net: &PetriNet, m: &mut Marking, t: usize) {
    for &p in &net.transitions[t].pre {
        m[p] -= 1;
    }
    for &p in &net.transitions[t].post {
        m[p] += 1;
    }
}

/// Shortest sequence of silent firings from `m` to a marking satisfying
/// `goal`, at most [`MAX_SILENT_HOPS`] long.
fn silent_path(net: &PetriNet, m: &Marking, goal: impl Fn(&Marking) -> bool) -> Option<Vec<usize>> {
    if goal(m) {
        return Some(Vec::new());
    }
    let mut seen: HashSet<Marking> = HashSet::from([m.clone()]);
    let mut queue: VecDeque<(Marking, Vec<usize>)> = VecDeque::from([(m.clone(), Vec::new())]);
    while let Some((cur, path)) = queue.pop_front() {
        if path.len() >= MAX_SILENT_HOPS {
            continue;
        }
        for (t, tr) in net.transitions.iter().enumerate() {
            if !tr.is_silent() || !is_enabled(net, &cur, t) {
                continue;
            }
            let mut next = cur.clone();
            fire(net, &mut next, t);
            if !seen.insert(next.clone()) {
                continue;
            }
            let mut p = path.clone();
            p.push(t);
            if goal(&next) {
                return Some(p);
            }
            queue.push_back((next, p));
        }
    }
    None
}

/// Visible labels enabled in any marking silently reachable from `m`.
fn enabled_labels<'a>(net: &'a PetriNet, m: &Marking) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    let mut seen: HashSet<Marking> = HashSet::from([m.clone()]);
    let mut queue = VecDeque::from([(m.clone(), 0usize)]);
    while let Some((cur, depth)) = queue.pop_front() {
        for (t, tr) in net.transitions.iter().enumerate() {
            if !is_enabled(net, &cur, t) {
                continue;
            }
            match &tr.label {
                Some(l) => {
                    out.insert(l.as_str());
                }
                None if depth < MAX_SILENT_HOPS => {
                    let mut next = cur.clone();
                    fire(net, &mut next, t);
                    if seen.insert(next.clone()) {
                        queue.push_back((next, depth + 1));
                    }
                }
                None => {}
            }
        }
    }
    out
}

/// Token counts for one replayed trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceReplay {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
}

impl TraceReplay {
    pub fn fitness(&self) -> f64 {
        let m = if self.consumed == 0 { 0.0 } else { self.missing as f64 / self.consumed as f64 };
        let r = if self.produced == 0 { 0.0 } else { self.remaining as f64 / self.produced as f64 };
        0.5 * (1.0 - m) + 0.5 * (1.0 - r)
    }

    pub fn fits(&self) -> bool {
        self.missing == 0 && self.remaining == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replay {
    pub traces: Vec<TraceReplay>,
    /// Firing count per transition, indexed like `net.transitions`.
    pub executions: Vec<u64>,
}

impl Replay {
    /// Mean per-trace fitness; 1 for an empty log.
    pub fn fitness(&self) -> f64 {
        if self.traces.is_empty() {
            return 1.0;
        }
        self.traces.iter().map(TraceReplay::fitness).sum::<f64>() / self.traces.len() as f64
    }
}

fn replay_trace(net: &PetriNet, trace: &[String], exec: &mut [u64]) -> TraceReplay {
    let mut m: Marking = vec![0; net.places.len()];
    m[net.source] = 1;
    let mut r = TraceReplay {
        produced: 1,
        consumed: 0,
        missing: 0,
        remaining: 0,
    };
    let mut step = |m: &mut Marking, t: usize, r: &mut TraceReplay| {
        r.consumed += net.transitions[t].pre.len() as u64;
        r.produced += net.transitions[t].post.len() as u64;
        fire(net, m, t);
        exec[t] += 1;
    };
    for a in trace {
        let Some(t) = net.transition_for(a) else {
            r.missing += 1;
            r.consumed += 1;
            continue;
        };
        if let Some(path) = silent_path(net, &m, |mk| is_enabled(net, mk, t)) {
            for s in path {
                step(&mut m, s, &mut r);
            }
        } else {
            for &p in &net.transitions[t].pre {
                let need = net.transitions[t].pre.iter().filter(|&&q| q == p).count() as u32;
                if m[p] < need {
                    r.missing += (need - m[p]) as u64;
                    m[p] = need;
                }
            }
        }
        step(&mut m, t, &mut r);
    }
    if let Some(path) = silent_path(net, &m, |mk| mk[net.sink] > 0) {
        for s in path {
            step(&mut m, s, &mut r);
        }
    }
    if m[net.sink] > 0 {
        m[net.sink] -= 1;
    } else {
        r.missing += 1;
    }
    r.consumed += 1;
    r.remaining = m.iter().map(|&x| x as u64).sum();
    r
}

/// Replays every trace, counting produced, consumed, missing and remaining
/// tokens.
///
/// A disabled transition is first enabled through the shortest silent path;
/// failing that it fires anyway and the absent tokens count as missing. An
/// activity with no transition in the net counts as one missing token.
pub fn replay<T: AsRef<[String]>>(net: &PetriNet, traces: &[T]) -> Replay {
    let mut executions = vec![0; net.transitions.len()];
    let traces = traces
        .iter()
        .map(|t| replay_trace(net, t.as_ref(), &mut executions))
        .collect();
    Replay { traces, executions }
}

pub fn replay_fitness<T: AsRef<[String]>>(net: &PetriNet, traces: &[T]) -> f64 {
    replay(net, traces).fitness()
}

/// Escaping-edges precision.
///
/// Every prefix that replays without missing tokens is a state. At each
/// state the visible activities the net enables are compared with the
/// activities the log actually continues with; precision is one minus the
/// frequency-weighted mean share of enabled activities never observed. A log
/// with no such state has precision 1.
pub fn precision_escaping<T: AsRef<[String]>>(net: &PetriNet, traces: &[T]) -> f64 {
    struct State<'a> {
        weight: u64,
        observed: BTreeSet<&'a str>,
        enabled: BTreeSet<&'a str>,
    }
    let initial = || {
        let mut m: Marking = vec![0; net.places.len()];
        m[net.source] = 1;
        m
    };
    // prefix trie; node 0 is the empty prefix
    let mut states = vec![State {
        weight: 0,
        observed: BTreeSet::new(),
        enabled: enabled_labels(net, &initial()),
    }];
    let mut children: HashMap<(usize, &str), usize> = HashMap::new();
    for trace in traces {
        let mut m = initial();
        let mut node = 0;
        for a in trace.as_ref() {
            states[node].weight += 1;
            states[node].observed.insert(a.as_str());
            let Some(t) = net.transition_for(a) else { break };
            let Some(path) = silent_path(net, &m, |mk| is_enabled(net, mk, t)) else {
                break;
            };
            for s in path {
                fire(net, &mut m, s);
            }
            fire(net, &mut m, t);
            node = *children.entry((node, a.as_str())).or_insert_with(|| {
                states.push(State {
                    weight: 0,
                    observed: BTreeSet::new(),
                    enabled: enabled_labels(net, &m),
                });
                states.len() - 1
            });
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in states.iter().filter(|s| s.weight > 0 && !s.enabled.is_empty()) {
        let escaping = s.enabled.difference(&s.observed).count();
        num += s.weight as f64 * escaping as f64 / s.enabled.len() as f64;
        den += s.weight as f64;
    }
    if den == 0.0 {
        1.0
    } else {
        (1.0 - num / den).clamp(0.0, 1.0)
    }
}

/// `1 − Σ_t 1/√exec_t / |visible|`; a transition never fired adds 1.
pub fn generalization(net: &PetriNet, replay: &Replay) -> Result<f64> {
    let visible: Vec<usize> = net.visible().map(|(i, _)| i).collect();
    if visible.is_empty() {
        return Err(Error::Empty("net has no visible transitions".into()));
    }
    let sum: f64 = visible
        .iter()
        .map(|&t| match replay.executions[t] {
            0 => 1.0,
            n => 1.0 / (n as f64).sqrt(),
        })
        .sum();
    Ok((1.0 - sum / visible.len() as f64).clamp(0.0, 1.0))
}

/// Inverse arc degree: `1 / (1 + max(0, d̄ − 2))` with `d̄` the mean degree
/// over places and transitions.
pub fn simplicity(net: &PetriNet) -> Result<f64> {
    if net.transitions.is_empty() {
        return Err(Error::Empty("net has no transitions".into()));
    }
    let deg = net.degrees();
    let mean = deg.iter().sum::<usize>() as f64 / deg.len() as f64;
    Ok(1.0 / (1.0 + (mean - 2.0).max(0.0)))
}
