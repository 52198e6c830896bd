use super::*;
use proptest::prelude::*;

const LISTING: &str = r#"{
"session"  : "c51973e3-562a-4b65-b6df-49f4c37792e1",
"timestamp_begin" : "2020-09-18T09:00:06.054Z",
"username"  : "87788",
"graduation" : "IGE",
"projectname"  : "PythaconResolution",
"filename"  : "P4.py",
"extension"  : "py",
"categoryName": "NavBarToolbar",
"commandName": "Run",
"platform": "JetBrains s.r.o. / PyCharmCore",
"platform_branch": "PyCharm",
"platform_version": "2020.2.1",
"java": "11.0.8+10-b944.31",
"os": "Mac OS X 10.15.6",
"os_arch": "x86_64",
"country": "Portugal",
"city": "Lisbon",
"hash": "0000a3a2cf78485419f15d7913789b16"
}"#;

fn record(user: &str, ts: &str, cmd: &str) -> String {
    format!(
        r#"{{"session":"s-{user}","timestamp_begin":"{ts}","username":"{user}","categoryName":"Editor","commandName":"{cmd}","filename":"P1.py"}}"#
    )
}

fn jsonl(records: &[String]) -> Vec<u8> {
    records.join("\n").into_bytes()
}

fn ts(ms: i64) -> String {
    let base = parse_timestamp("2020-09-18T09:00:00.000Z").unwrap();
    format_timestamp(&(base + chrono::Duration::milliseconds(ms)))
}

#[test]
fn parses_listing_record() {
    let out = parse_events(LISTING.as_bytes(), DEFAULT_CASE_KEY).unwrap();
    assert!(out.rejected.is_empty());
    assert_eq!(out.log.sessions.len(), 1);
    let e = &out.log.sessions[0].events[0];
    assert_eq!(e.activity, "Run");
    assert_eq!(e.case_id, "87788");
    assert_eq!(e.attr("os"), Some("Mac OS X 10.15.6"));
    assert_eq!(e.category(), Some("NavBarToolbar"));
    assert_eq!(e.hash.as_deref(), Some("0000a3a2cf78485419f15d7913789b16"));
    assert!(!e.attributes.contains_key("hash"));
    assert_eq!(format_timestamp(&e.timestamp), "2020-09-18T09:00:06.054Z");
}

#[test]
fn empty_array_gives_empty_log() {
    let out = parse_events(b"[]", DEFAULT_CASE_KEY).unwrap();
    assert!(out.log.sessions.is_empty());
    let out = parse_events(b"  \n ", DEFAULT_CASE_KEY).unwrap();
    assert_eq!(out.log.num_events(), 0);
}

#[test]
fn same_user_events_form_one_ordered_session() {
    // input order deliberately not chronological
    let recs = [
        record("7", &ts(30), "C"),
        record("7", &ts(10), "A"),
        record("7", &ts(20), "B"),
    ];
    let out = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap();
    assert_eq!(out.log.sessions.len(), 1);
    let got: Vec<_> = out.log.sessions[0].activities().collect();
    let mut oracle: Vec<_> = out.log.events().map(|e| (e.timestamp, e.activity.clone())).collect();
    oracle.sort();
    let oracle: Vec<_> = oracle.iter().map(|(_, a)| a.as_str()).collect();
    assert_eq!(got, oracle);
    assert_eq!(got, ["A", "B", "C"]);
}

#[test]
fn array_input_is_accepted() {
    let recs = [record("1", &ts(0), "A"), record("2", &ts(0), "B")];
    let input = format!("[{}]", recs.join(","));
    let out = parse_events(input.as_bytes(), DEFAULT_CASE_KEY).unwrap();
    assert_eq!(out.log.sessions.len(), 2);
}

#[test]
fn malformed_json_reports_byte_offset() {
    let good = record("1", &ts(0), "A");
    let input = format!("{good}\n{{\"session\": oops}}\n");
    match parse_events(input.as_bytes(), DEFAULT_CASE_KEY) {
        Err(Error::Parse { offset, .. }) => {
            let line2 = good.len() + 1;
            assert!(offset >= line2 && offset < input.len(), "offset {offset}");
            assert_eq!(&input[offset..offset + 1], "o");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_field_is_collected_and_parsing_continues() {
    let bad = r#"{"session":"x","timestamp_begin":"2020-09-18T09:00:00Z","username":"1","commandName":"Run"}"#;
    let recs = [record("1", &ts(0), "A"), bad.to_string(), record("1", &ts(5), "B")];
    let out = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap();
    assert_eq!(out.log.num_events(), 2);
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(out.rejected[0].record, 1);
    assert!(out.rejected[0].message.contains("categoryName"));
}

#[test]
fn all_records_bad_is_fatal() {
    let bad = r#"{"session":"x","username":"1"}"#;
    let err = parse_events(bad.as_bytes(), DEFAULT_CASE_KEY).unwrap_err();
    assert!(matches!(err, Error::NoValidRecords { rejected: 1, .. }));
}

#[test]
fn hash_verdicts() {
    let secret = b"pythacon";
    let mut fields: std::collections::BTreeMap<String, String> = serde_json::from_str::<
        std::collections::BTreeMap<String, String>,
    >(&record("9", &ts(0), "Run"))
    .unwrap();
    let good = event_digest(&fields, secret);
    fields.insert("hash".into(), good.clone());
    let ok_rec = serde_json::to_string(&fields).unwrap();

    // one flipped character in the filename, hash left as it was
    fields.insert("filename".into(), "P2.py".into());
    fields.insert("timestamp_begin".into(), ts(1));
    let tampered = serde_json::to_string(&fields).unwrap();
    let mut mutated = fields.clone();
    mutated.remove("hash");
    assert_ne!(event_digest(&mutated, secret), good);

    let unsigned = record("9", &ts(2), "Run");
    let log = parse_events(&jsonl(&[ok_rec, tampered, unsigned]), DEFAULT_CASE_KEY)
        .unwrap()
        .log;
    let before = log.clone();
    let report = verify_hashes(&log, secret);
    assert_eq!(
        report.verdicts,
        vec![
            (0, Verdict::Ok),
            (1, Verdict::HashMismatch),
            (2, Verdict::HashMissing)
        ]
    );
    assert_eq!(report.ok + report.mismatched + report.missing, report.total());
    assert_eq!(log, before);
}

#[test]
fn digest_is_md5_length_lowercase_hex() {
    let fields = [("a".to_string(), "1".to_string())].into_iter().collect();
    let d = event_digest(&fields, b"");
    assert_eq!(d.len(), 32);
    assert!(d.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    // md5("a=1"), computed independently
    assert_eq!(d, "3872c9ae3f427af0be0ead09d07ae2cf");
    assert_eq!(canonical_string(&fields), "a=1");
}

#[test]
fn dedupe_keeps_first_occurrence() {
    let recs = [
        record("1", &ts(0), "A"),
        record("1", &ts(0), "A"),
        record("1", &ts(0), "B"),
        record("1", &ts(1), "C"),
    ];
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let d = dedupe(&log);
    let got: Vec<_> = d.events().map(|e| e.activity.as_str()).collect();
    assert_eq!(got, ["A", "C"]);
}

#[test]
fn recode_with_default_map() {
    let map = ActivityMap::default();
    let recs = [
        record("1", &ts(0), "Run"),
        record("1", &ts(1), "Accepted_Answer"),
        record("1", &ts(2), "SomethingUnheardOf"),
        record("1", &ts(3), "EditorBackSpace"),
    ];
    let mut recs = recs.to_vec();
    // the unmatched one must not fall through to the Editor* category rule
    recs[2] = recs[2].replace("\"Editor\"", "\"MainMenu\"");
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let r = recode_activities(&log, &map);
    let got: Vec<_> = r.events().map(|e| e.activity.as_str()).collect();
    assert_eq!(got, ["Executing", "Accepted_Answer", SPURIOUS, "Editing"]);
    assert_eq!(r.events().nth(0).unwrap().command(), Some("Run"));
}

#[test]
fn sessionize_partitions_by_key() {
    let recs: Vec<String> = (0..5)
        .map(|i| record(if i % 2 == 0 { "a" } else { "b" }, &ts(i), "X"))
        .collect();
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let s = sessionize(&log, "username").unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].len() + s[1].len(), 5);
    let single = sessionize(&EventLog::from_sessions(vec![s[1].clone()]), "username").unwrap();
    assert_eq!(single.len(), 1);
}

#[test]
fn sessionize_by_session_field() {
    let recs = [record("1", &ts(0), "A"), record("2", &ts(1), "B")];
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let s = sessionize(&log, "session").unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].case_id, "s-1");
}

#[test]
fn sessionize_missing_key_names_event() {
    let log = parse_events(record("1", &ts(0), "A").as_bytes(), DEFAULT_CASE_KEY)
        .unwrap()
        .log;
    match sessionize(&log, "team") {
        Err(Error::MissingCaseKey { seq, key, .. }) => {
            assert_eq!(seq, 0);
            assert_eq!(key, "team");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn sentences_at_each_level() {
    let recs = [record("1", &ts(0), "Run"), record("1", &ts(1), "SaveAll")];
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let c = to_sentences(&log.sessions, Level::Command).unwrap();
    assert_eq!(c.sentences, vec![vec!["Run".to_string(), "SaveAll".to_string()]]);
    let recoded = recode_activities(&log, &ActivityMap::default());
    let a = to_sentences(&recoded.sessions, Level::Activity).unwrap();
    assert_eq!(a.sentences, vec![vec!["Executing".to_string(), "Editing".to_string()]]);
    let empty = to_sentences(&[], Level::Activity).unwrap();
    assert!(empty.is_empty() && empty.vocabulary.is_empty());
}

#[test]
fn canonical_round_trip() {
    let recs = [
        record("2", &ts(3), "B"),
        record("1", &ts(0), "A"),
        record("1", &ts(1), "C"),
    ];
    let log = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
    let mut buf = Vec::new();
    write_canonical_jsonl(&log, &mut buf).unwrap();
    let back = read_canonical(&buf[..]).unwrap();
    assert_eq!(back, log);
    let mut csv = Vec::new();
    write_canonical_csv(&log, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("case_id,timestamp,activity,command,category\n1,"));
}

fn arb_records() -> impl Strategy<Value = Vec<(u8, i64, u8)>> {
    prop::collection::vec((0u8..4, 0i64..50, 0u8..5), 0..40)
}

fn build(recs: &[(u8, i64, u8)]) -> EventLog {
    let lines: Vec<String> = recs
        .iter()
        .map(|(u, t, c)| record(&u.to_string(), &ts(*t), &format!("C{c}")))
        .collect();
    if lines.is_empty() {
        return EventLog::empty();
    }
    parse_events(&jsonl(&lines), DEFAULT_CASE_KEY).unwrap().log
}

proptest! {
    #[test]
    fn dedupe_is_idempotent(recs in arb_records()) {
        let once = dedupe(&build(&recs));
        prop_assert_eq!(dedupe(&once), once);
    }

    #[test]
    fn recode_preserves_count_and_order(recs in arb_records()) {
        let log = build(&recs);
        let r = recode_activities(&log, &ActivityMap::default());
        let a: Vec<_> = log.events().map(|e| e.seq).collect();
        let b: Vec<_> = r.events().map(|e| e.seq).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sessionize_ignores_input_permutation(
        n in 1usize..30,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        // distinct timestamps
        let recs: Vec<String> = (0..n)
            .map(|i| record(&(i % 3).to_string(), &ts(i as i64 * 7), &format!("C{i}")))
            .collect();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = parse_events(&jsonl(&recs), DEFAULT_CASE_KEY).unwrap().log;
        let b = parse_events(&jsonl(&shuffled), DEFAULT_CASE_KEY).unwrap().log;
        let sa = sessionize(&a, "username").unwrap();
        let sb = sessionize(&b, "username").unwrap();
        let proj = |s: &[Session]| -> Vec<(String, Vec<String>)> {
            s.iter().map(|s| (s.case_id.clone(), s.activities().map(str::to_owned).collect())).collect()
        };
        prop_assert_eq!(proj(&sa), proj(&sb));
    }

    #[test]
    fn sentence_tokens_equal_session_lengths(recs in arb_records()) {
        let log = build(&recs);
        let c = to_sentences(&log.sessions, Level::Command).unwrap();
        prop_assert_eq!(c.num_tokens(), log.sessions.iter().map(Session::len).sum::<usize>());
    }
}
