use std::time::Duration;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::eventlog::parse_events;

fn t(s: &str) -> Vec<String> {
    s.chars().map(|c| c.to_string()).collect()
}

fn log(traces: &[&str]) -> Vec<Vec<String>> {
    traces.iter().map(|s| t(s)).collect()
}

fn net_of(traces: &[&str]) -> PetriNet {
    dfg_to_petri(&discover_dfg(&log(traces))).unwrap()
}

fn random_traces(rng: &mut ChaCha8Rng, n: usize, alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string())
                .collect()
        })
        .collect()
}

/// Random firing sequence from the initial marking until only the sink is
/// marked; `None` if it runs too long or deadlocks.
fn playout(net: &PetriNet, rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    let mut m = vec![0u32; net.places.len()];
    m[net.source] = 1;
    let mut out = Vec::new();
    for _ in 0..200 {
        if m[net.sink] == 1 && m.iter().sum::<u32>() == 1 {
            return Some(out);
        }
        let enabled: Vec<usize> = (0..net.transitions.len())
            .filter(|&i| net.transitions[i].pre.iter().all(|&p| m[p] > 0))
            .collect();
        if enabled.is_empty() {
            return None;
        }
        let tr = &net.transitions[enabled[rng.random_range(0..enabled.len())]];
        for &p in &tr.pre {
            m[p] -= 1;
        }
        for &p in &tr.post {
            m[p] += 1;
        }
        if let Some(l) = &tr.label {
            out.push(l.clone());
        }
    }
    None
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Brute-force isomorphism for small nets, respecting labels, source and sink.
fn isomorphic(a: &PetriNet, b: &PetriNet) -> bool {
    if a.places.len() != b.places.len() || a.transitions.len() != b.transitions.len() {
        return false;
    }
    let sig = |net: &PetriNet, map: &dyn Fn(usize) -> usize| {
        let mut v: Vec<(Option<String>, Vec<usize>, Vec<usize>)> = net
            .transitions
            .iter()
            .map(|t| {
                let mut pre: Vec<usize> = t.pre.iter().map(|&p| map(p)).collect();
                let mut post: Vec<usize> = t.post.iter().map(|&p| map(p)).collect();
                pre.sort();
                post.sort();
                (t.label.clone(), pre, post)
            })
            .collect();
        v.sort();
        v
    };
    let target = sig(b, &|p| p);
    permutations(a.places.len()).into_iter().any(|perm| {
        perm[a.source] == b.source && perm[a.sink] == b.sink && sig(a, &|p| perm[p]) == target
    })
}

#[test]
fn dfg_single_path_and_self_loop() {
    let d = discover_dfg(&log(&["abc"]));
    assert_eq!(d.edges.len(), 2);
    assert_eq!(d.edges[&("a".into(), "b".into())], 1);
    assert_eq!(d.edges[&("b".into(), "c".into())], 1);
    assert_eq!(d.starts, [("a".to_string(), 1)].into());
    assert_eq!(d.ends, [("c".to_string(), 1)].into());
    let d = discover_dfg(&log(&["aa", "aa"]));
    assert_eq!(d.edges, [(("a".to_string(), "a".to_string()), 2)].into());
}

#[test]
fn dfg_counting_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let traces = random_traces(&mut rng, 100, &["a", "b", "c", "d", "e"], 12);
    let d = discover_dfg(&traces);
    let expected: usize = traces.iter().map(|t| t.len() - 1).sum();
    assert_eq!(d.edges.values().sum::<u64>() as usize, expected);
    assert_eq!(d.starts.values().sum::<u64>(), 100);
    assert_eq!(d.ends.values().sum::<u64>(), 100);
    for (a, b) in d.edges.keys() {
        assert!(d.activities.contains_key(a) && d.activities.contains_key(b));
    }
}

#[test]
fn two_activity_net_matches_hand_construction() {
    let net = net_of(&["ab"]);
    let mut hand = PetriNet::new();
    let (ra, da) = (hand.add_place("ra"), hand.add_place("da"));
    let (rb, db) = (hand.add_place("rb"), hand.add_place("db"));
    hand.add_transition("b", Some("b"), &[rb], &[db]);
    hand.add_transition("a", Some("a"), &[ra], &[da]);
    hand.add_transition("s", None, &[hand.source], &[ra]);
    hand.add_transition("ab", None, &[da], &[rb]);
    hand.add_transition("e", None, &[db], &[hand.sink]);
    assert!(isomorphic(&net, &hand));
    // a wrong routing is not isomorphic
    let mut bad = hand.clone();
    bad.transitions[4].pre = vec![da];
    assert!(!isomorphic(&net, &bad));
    net.validate().unwrap();
}

#[test]
fn single_activity_net_replays() {
    let net = net_of(&["a"]);
    assert_eq!(replay_fitness(&net, &log(&["a"])), 1.0);
}

#[test]
fn empty_dfg_is_rejected() {
    assert!(dfg_to_petri(&Dfg::default()).is_err());
}

#[test]
fn hand_ledger_for_an_inserted_activity() {
    // net of <a,b>, trace <a,c,b>:
    // initial token p=1; tau_start_a c=1 p=2; a c=2 p=3; c is foreign m=1 c=3;
    // tau_a_b c=4 p=4; b c=5 p=5; tau_end_b c=6 p=6; final token c=7; r=0
    let net = net_of(&["ab"]);
    let r = replay(&net, &log(&["acb"]));
    assert_eq!(
        r.traces[0],
        TraceReplay {
            produced: 6,
            consumed: 7,
            missing: 1,
            remaining: 0
        }
    );
    assert!((r.fitness() - (1.0 - 1.0 / 14.0)).abs() < 1e-12);
}

#[test]
fn foreign_log_has_zero_fitness() {
    let net = net_of(&["ab"]);
    // missing: x, y, final token; remaining: the source token
    let r = replay(&net, &log(&["xy"]));
    assert_eq!(r.traces[0].missing, 3);
    assert_eq!(r.traces[0].remaining, 1);
    assert!(r.fitness().abs() < 1e-12);
}

#[test]
fn skipped_activity_is_forced() {
    let net = net_of(&["abc"]);
    let r = replay(&net, &log(&["ac"]));
    assert!(r.traces[0].missing > 0 && r.traces[0].remaining > 0);
    let f = r.fitness();
    assert!(f > 0.0 && f < 1.0);
}

#[test]
fn playouts_fit_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let traces = random_traces(&mut rng, 8, &["a", "b", "c", "d", "e", "f"], 6);
        let net = dfg_to_petri(&discover_dfg(&traces)).unwrap();
        net.validate().unwrap();
        let mut sample = Vec::new();
        while sample.len() < 100 {
            if let Some(tr) = playout(&net, &mut rng) {
                sample.push(tr);
            }
        }
        assert!((replay_fitness(&net, &sample) - 1.0).abs() < 1e-9);
    }
}

fn parallel_net() -> PetriNet {
    let mut n = PetriNet::new();
    let (p1, p2, q1, q2) = (n.add_place("p1"), n.add_place("p2"), n.add_place("q1"), n.add_place("q2"));
    n.add_transition("split", None, &[n.source], &[p1, p2]);
    n.add_transition("a", Some("a"), &[p1], &[q1]);
    n.add_transition("b", Some("b"), &[p2], &[q2]);
    n.add_transition("join", None, &[q1, q2], &[n.sink]);
    n
}

#[test]
fn concurrency_is_replayed() {
    let net = parallel_net();
    net.validate().unwrap();
    let l = log(&["ab", "ba"]);
    assert_eq!(replay_fitness(&net, &l), 1.0);
    assert_eq!(precision_escaping(&net, &l), 1.0);
    assert!(replay_fitness(&net, &log(&["a"])) < 1.0);
}

#[test]
fn precision_of_sequence_flower_and_choice() {
    assert_eq!(precision_escaping(&net_of(&["abc"]), &log(&["abc"])), 1.0);

    let mut flower = PetriNet::new();
    let hub = flower.add_place("hub");
    flower.add_transition("in", None, &[flower.source], &[hub]);
    flower.add_transition("out", None, &[hub], &[flower.sink]);
    for l in ["a", "b", "c"] {
        flower.add_transition(l, Some(l), &[hub], &[hub]);
    }
    let l = log(&["abc"]);
    assert_eq!(replay_fitness(&flower, &l), 1.0);
    // three states, each enabling {a,b,c} and observing one: 1 − 2/3
    let p = precision_escaping(&flower, &l);
    assert!((p - 1.0 / 3.0).abs() < 1e-12);

    let choice = net_of(&["ac", "bc"]);
    assert_eq!(precision_escaping(&choice, &log(&["ac", "bc"])), 1.0);
    assert!((precision_escaping(&choice, &log(&["ac"])) - 0.75).abs() < 1e-12);
}

#[test]
fn precision_of_empty_log_is_one() {
    assert_eq!(precision_escaping(&net_of(&["ab"]), &Vec::<Vec<String>>::new()), 1.0);
}

#[test]
fn generalization_closed_forms() {
    let net = parallel_net();
    let rep = |a: u64, b: u64| Replay {
        traces: vec![],
        executions: vec![0, a, b, 0],
    };
    assert_eq!(generalization(&net, &rep(1, 1)).unwrap(), 0.0);
    assert!((generalization(&net, &rep(100, 100)).unwrap() - 0.9).abs() < 1e-12);
    assert_eq!(generalization(&net, &rep(0, 0)).unwrap(), 0.0);

    let mut three = net_of(&["abc"]);
    three.transitions.sort_by_key(|t| t.label.is_none());
    let r = Replay {
        traces: vec![],
        executions: vec![1, 4, 16, 0, 0, 0, 0],
    };
    assert!((generalization(&three, &r).unwrap() - (1.0 - 1.75 / 3.0)).abs() < 1e-12);
}

#[test]
fn simplicity_closed_forms() {
    let mut seq = PetriNet::new();
    let p = seq.add_place("p");
    seq.add_transition("a", Some("a"), &[seq.source], &[p]);
    seq.add_transition("b", Some("b"), &[p], &[seq.sink]);
    assert_eq!(simplicity(&seq).unwrap(), 1.0);
    assert_eq!(simplicity(&net_of(&["abcd"])).unwrap(), 1.0);

    // two places, two transitions, six arcs: mean degree 3
    let mut dense = PetriNet::new();
    dense.add_transition("a", Some("a"), &[dense.source], &[dense.source, dense.sink]);
    dense.add_transition("b", Some("b"), &[dense.source], &[dense.source, dense.sink]);
    assert_eq!(simplicity(&dense).unwrap(), 0.5);
    assert!(simplicity(&PetriNet::new()).is_err());
}

#[test]
fn simplicity_matches_arc_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let traces = random_traces(&mut rng, 6, &["a", "b", "c", "d"], 7);
        let net = dfg_to_petri(&discover_dfg(&traces)).unwrap();
        let nodes = (net.places.len() + net.transitions.len()) as f64;
        let mean = 2.0 * net.num_arcs() as f64 / nodes;
        let expected = 1.0 / (1.0 + (mean - 2.0).max(0.0));
        assert!((simplicity(&net).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn quality_row_average() {
    let q = QualityMetrics::new(0.908, 1.0, 0.192, 0.507, 12, Duration::from_secs(3725));
    assert!((q.average - 0.65175).abs() < 1e-12);
    assert_eq!(format_duration(q.duration), "01:02:05");
    let one = QualityMetrics::new(1.0, 1.0, 1.0, 1.0, 0, Duration::ZERO);
    assert_eq!(one.average, 1.0);
}

#[test]
fn quality_components_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let traces = random_traces(&mut rng, 10, &["a", "b", "c", "d", "e"], 10);
        let m = discover_and_evaluate(&traces, 7, 1).unwrap().metrics;
        for v in [m.fitness, m.precision, m.generalization, m.simplicity, m.average] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(m.simplicity > 0.0);
        assert!((m.average - (m.fitness + m.precision + m.generalization + m.simplicity) / 4.0).abs() < 1e-9);
        assert_eq!(m.fitness, 1.0);
    }
}

#[test]
fn interactions_sum_ide_and_judge_events() {
    let mut lines = Vec::new();
    for i in 0..10 {
        lines.push(format!(
            r#"{{"session":"s1","timestamp_begin":"2020-09-18T09:00:{i:02}.000Z","username":"u1","categoryName":"Editor","commandName":"Typing"}}"#
        ));
    }
    for i in 0..2 {
        lines.push(format!(
            r#"{{"session":"s1","timestamp_begin":"2020-09-18T09:01:{i:02}.000Z","username":"u1","categoryName":"Mooshak","commandName":"Accepted"}}"#
        ));
    }
    lines.push(
        r#"{"session":"s2","timestamp_begin":"2020-09-18T09:00:00.000Z","username":"u2","categoryName":"Editor","commandName":"Typing"}"#.into(),
    );
    let parsed = parse_events(lines.join("\n").as_bytes(), "username").unwrap();
    assert_eq!(interactions_count(&parsed.log, "u1").unwrap(), 12);
    let total: u64 = parsed
        .log
        .case_ids()
        .iter()
        .map(|c| interactions_count(&parsed.log, c).unwrap())
        .sum();
    assert_eq!(total as usize, parsed.log.num_events());
    assert!(matches!(
        interactions_count(&parsed.log, "nobody"),
        Err(Error::UnknownCase(_))
    ));
}

#[test]
fn exports() {
    let d = discover_dfg(&log(&["ab", "ab", "ba"]));
    let mut buf = Vec::new();
    d.write_edges_csv(&mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "source,target,frequency\na,b,2\nb,a,1\n"
    );
    let net = dfg_to_petri(&d).unwrap();
    let dot = net.to_dot();
    assert!(dot.starts_with("digraph petri {") && dot.contains("label=\"a\""));
    let json = serde_json::to_value(&net).unwrap();
    assert_eq!(json["places"].as_array().unwrap().len(), net.places.len());
    assert_eq!(json["source"], 0);
}

#[test]
fn dead_ends_are_reported() {
    let mut d = discover_dfg(&log(&["ab"]));
    d.activities.insert("z".into(), 1);
    d.edges.insert(("a".into(), "z".into()), 1);
    assert_eq!(d.dead_ends(), vec!["z".to_string()]);
    dfg_to_petri(&d).unwrap().validate().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dfg_ignores_trace_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut traces = random_traces(&mut rng, 15, &["a", "b", "c"], 6);
        let d = discover_dfg(&traces);
        traces.reverse();
        prop_assert_eq!(d, discover_dfg(&traces));
    }

    #[test]
    fn nets_are_structurally_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces = random_traces(&mut rng, 10, &["a", "b", "c", "d"], 8);
        let net = dfg_to_petri(&discover_dfg(&traces)).unwrap();
        prop_assert!(net.validate().is_ok());
        prop_assert_eq!(net.visible().count(), discover_dfg(&traces).activities.len());
    }

    #[test]
    fn simplicity_ignores_labels_and_duplicates(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces = random_traces(&mut rng, 10, &["a", "b", "c", "d"], 8);
        let s = simplicity(&dfg_to_petri(&discover_dfg(&traces)).unwrap()).unwrap();
        let renamed: Vec<Vec<String>> = traces
            .iter()
            .map(|t| t.iter().map(|a| format!("x_{a}")).collect())
            .collect();
        let mut dup = traces.clone();
        dup.push(traces[0].clone());
        prop_assert_eq!(s, simplicity(&dfg_to_petri(&discover_dfg(&renamed)).unwrap()).unwrap());
        prop_assert_eq!(s, simplicity(&dfg_to_petri(&discover_dfg(&dup)).unwrap()).unwrap());
    }
}
