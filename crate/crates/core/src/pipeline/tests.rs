use std::collections::BTreeMap;
use std::fs;

use super::*;
use crate::error::Error;
use crate::synth::SyntheticSpec;

fn cases(scores: &[(&str, &str)]) -> CaseAttributes {
    scores
        .iter()
        .map(|(id, s)| {
            let attrs = BTreeMap::from([
                ("score".to_string(), s.to_string()),
                ("graduation".to_string(), if id.len() % 2 == 0 { "LEI" } else { "ETI" }.to_string()),
            ]);
            (id.to_string(), attrs)
        })
        .collect()
}

fn stamp() -> Stamp {
    Stamp {
        seed: 7,
        config_digest: "abc".into(),
    }
}

#[test]
fn config_defaults_round_trip_through_toml() {
    let c = RunConfig::default();
    let back = RunConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn partial_config_fills_defaults() {
    let c = RunConfig::from_toml(
        r#"
seed = 9
[topics]
k_max = 6
[stats.groups]
by = "quantile"
key = "score"
lower = 0.25
upper = 0.75
"#,
    )
    .unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.topics.k_max, 6);
    assert_eq!(c.topics.k_min, 2);
    assert_eq!(c.input.case_key, "username");
    assert!(matches!(c.stats.groups, GroupSpec::Quantile { .. }));
}

#[test]
fn unknown_keys_rejected() {
    let e = RunConfig::from_toml("[topics]\nk_maxx = 3\n").unwrap_err();
    assert!(matches!(e, Error::InvalidArgument(_)), "{e}");
}

#[test]
fn digest_ignores_locations_but_not_parameters() {
    let a = RunConfig::default();
    let mut b = a.clone();
    b.out_dir = "elsewhere".into();
    b.input.paths = vec!["x.jsonl".into()];
    b.input.secret = Some("s".into());
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    b.topics.k_max = 7;
    assert_ne!(a.digest().unwrap(), b.digest().unwrap());
    let mut c = a.clone();
    c.seed = 1;
    assert_ne!(a.digest().unwrap(), c.digest().unwrap());
    assert_eq!(a.digest().unwrap().len(), 64);
}

#[test]
fn validate_catches_bad_ranges() {
    let mut c = RunConfig::default();
    c.topics.k_min = 1;
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.topics.fingerprint_order = 4;
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.stats.metrics = vec!["speed".into()];
    assert!(c.validate().is_err());
}

#[test]
fn type7_quantiles() {
    // numpy.quantile([1, 2, 3, 4], [0.25, 0.5, 0.75]) = 1.75, 2.5, 3.25
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-12);
    assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-12);
    assert!((quantile(&x, 0.75) - 3.25).abs() < 1e-12);
    assert_eq!(quantile(&x, 1.0), 4.0);
    assert_eq!(quantile(&[5.0], 0.3), 5.0);
}

#[test]
fn rank_groups_by_score() {
    let c = cases(&[("a", "10"), ("b", "50"), ("c", "30"), ("d", "20"), ("e", "40"), ("f", "5")]);
    let g = GroupSpec::Rank { key: "score".into(), n: 2 }.assign(&c).unwrap();
    let names: Vec<&str> = g.iter().map(|g| g.name.as_str()).collect();
    assert_eq!(names, ["Top2", "Others", "Bottom2"]);
    assert_eq!(g[0].members, ["b", "e"]);
    assert_eq!(g[1].members, ["c", "d"]);
    assert_eq!(g[2].members, ["a", "f"]);
}

#[test]
fn rank_groups_need_enough_cases() {
    let c = cases(&[("a", "1"), ("b", "2"), ("c", "3")]);
    let e = GroupSpec::Rank { key: "score".into(), n: 2 }.assign(&c).unwrap_err();
    assert!(matches!(e, Error::Validation(_)));
}

#[test]
fn quantile_groups() {
    let c = cases(&[("a", "1"), ("b", "2"), ("c", "3"), ("d", "4"), ("e", "5")]);
    let g = GroupSpec::Quantile { key: "score".into(), lower: 0.25, upper: 0.75 }
        .assign(&c)
        .unwrap();
    // quartiles 2 and 4
    assert_eq!(g[0].name, "Q1");
    assert_eq!(g[0].members, ["a", "b"]);
    assert_eq!(g[1].members, ["c"]);
    assert_eq!(g[2].members, ["d", "e"]);
}

#[test]
fn attribute_and_list_groups() {
    let c = cases(&[("aa", "1"), ("b", "2"), ("cc", "3")]);
    let g = GroupSpec::Attribute { key: "graduation".into() }.assign(&c).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g[0].name, "ETI");
    assert_eq!(g[1].members, ["aa", "cc"]);
    let lists = GroupSpec::Lists {
        groups: vec![
            NamedGroup { name: "x".into(), members: vec!["aa".into(), "zz".into()] },
            NamedGroup { name: "y".into(), members: vec!["zz".into()] },
        ],
    };
    let g = lists.assign(&c).unwrap();
    assert_eq!(g.len(), 1);
    assert_eq!(g[0].members, ["aa"]);
}

#[test]
fn grouping_reports_bad_attributes() {
    let c = cases(&[("a", "high"), ("b", "2")]);
    assert!(matches!(
        GroupSpec::Rank { key: "score".into(), n: 1 }.assign(&c),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        GroupSpec::Attribute { key: "city".into() }.assign(&c),
        Err(Error::Validation(_))
    ));
}

#[test]
fn tables_carry_the_stamp() {
    let mut t = Table::new(&["a", "b"]);
    t.push(vec!["1".into(), num(f64::NAN)]);
    let s = String::from_utf8(t.to_csv(&stamp()).unwrap()).unwrap();
    assert_eq!(s, "a,b,seed,config_digest\n1,NA,7,abc\n");
}

#[test]
fn stamped_json_puts_provenance_first() {
    #[derive(serde::Serialize)]
    struct D {
        x: u32,
    }
    let s = String::from_utf8(stamped_json(&D { x: 3 }, &stamp()).unwrap()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config_digest"], "abc");
    assert_eq!(v["x"], 3);
    assert!(s.find("seed").unwrap() < s.find("\"x\"").unwrap());
}

#[test]
fn atomic_write_replaces_and_cleans_up() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/out.txt");
    write_atomic(&p, b"one").unwrap();
    write_atomic(&p, b"two").unwrap();
    assert_eq!(fs::read(&p).unwrap(), b"two");
    let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
    assert_eq!(names.len(), 1);
}

#[test]
fn svg_charts_are_well_formed() {
    let series = vec![
        ("a".to_string(), vec![(1.0, 2.0), (2.0, 1.5)]),
        ("b<&>".to_string(), vec![(1.0, 3.0), (2.0, f64::NAN)]),
    ];
    let s = svg::line_chart("t", "x", "y", &series, &stamp());
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    assert_eq!(s.matches("<polyline").count(), 2);
    assert!(s.contains("seed=7 config_digest=abc"));
    assert!(s.contains("b&lt;&amp;&gt;"));
    let b = svg::bar_chart("t", "p", &[("x".into(), 0.2), ("y".into(), 0.0)], &stamp());
    assert_eq!(b.matches("<rect").count(), 3);
    let flat = svg::line_chart("t", "x", "y", &[("c".into(), vec![(1.0, 1.0)])], &stamp());
    assert!(!flat.contains("NaN"));
}

fn small_run(dir: &std::path::Path) -> Context {
    let mut cfg = RunConfig {
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.synth = SyntheticSpec {
        participants: 12,
        profiles: 8,
        sessions: (2, 3),
        session_len: (15, 25),
        group_size: 3,
        ..SyntheticSpec::default()
    };
    cfg.stats.groups = GroupSpec::Rank { key: "score".into(), n: 3 };
    cfg.topics = TopicConfig {
        k_max: 4,
        orders: vec![1, 2],
        iterations: 60,
        burn_in: 20,
        heldout: false,
        ..TopicConfig::default()
    };
    cfg.entropy.orders = vec![1, 2, 3];
    let synth = cmd_synth(&Context::new(cfg.clone()).unwrap()).unwrap();
    cfg.input.paths = vec![synth.path];
    cfg.input.secret = Some(cfg.synth.secret.clone());
    Context::new(cfg).unwrap()
}

#[test]
fn small_pipeline_runs_and_repeats_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_report(&small_run(a.path())).unwrap();
    cmd_report(&small_run(b.path())).unwrap();
    assert_eq!(ra.ingest.rejected, 0);
    assert_eq!(ra.ingest.tamper.as_ref().unwrap().mismatched, 0);
    assert_eq!(ra.cases, 12);
    assert_eq!(ra.topics.fingerprints.assignment.len(), 12);
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.ends_with(".csv") || name.ends_with(".json") || name.ends_with(".jsonl") || name.ends_with(".md") {
            let same = fs::read(a.path().join(&name)).unwrap() == fs::read(b.path().join(&name)).unwrap();
            assert!(same, "{name} differs between runs");
            compared += 1;
        }
    }
    assert!(compared >= 12, "{compared}");
    let stats = &ra.stats;
    let simp = stats.comparison("simplicity").unwrap().anova.as_ref().unwrap();
    assert_eq!((simp.df_between, simp.df_within), (2, 9));
}

#[test]
fn tampered_records_are_counted() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = small_run(dir.path());
    let path = ctx.config.input.paths[0].clone();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[3] = lines[3].replace("\"city\":\"Lisbon\"", "\"city\":\"Porto\"");
    lines[8] = lines[8].replace("\"os_arch\":\"x86_64\"", "\"os_arch\":\"arm64\"");
    fs::write(&path, lines.join("\n")).unwrap();
    let out = cmd_ingest(&ctx).unwrap();
    assert_eq!(out.tamper.unwrap().mismatched, 2);
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn missing_input_and_missing_stages_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        input: InputConfig {
            paths: vec![dir.path().join("nope.jsonl")],
            ..InputConfig::default()
        },
        ..RunConfig::default()
    };
    let ctx = Context::new(cfg).unwrap();
    assert!(matches!(cmd_ingest(&ctx), Err(Error::Io(_))));
    assert!(matches!(cmd_entropy(&ctx), Err(Error::Validation(_))));
    assert!(matches!(cmd_process(&ctx), Err(Error::Validation(_))));
}

#[test]
fn two_groups_give_one_between_df_and_identical_groups_are_not_significant() {
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = small_run(dir.path());
    cmd_ingest(&ctx).unwrap();
    cmd_process(&ctx).unwrap();
    let log = ctx.load_log().unwrap();
    let ids: Vec<String> = log.case_ids().into_iter().map(str::to_owned).collect();
    ctx.config.stats.groups = GroupSpec::Lists {
        groups: vec![
            NamedGroup { name: "first".into(), members: ids[..6].to_vec() },
            NamedGroup { name: "second".into(), members: ids[6..].to_vec() },
        ],
    };
    let out = cmd_stats(&ctx).unwrap();
    let a = out.comparison("simplicity").unwrap().anova.clone().unwrap();
    assert_eq!((a.df_between, a.df_within), (1, 10));

    // the same members twice: zero between-group variation
    ctx.config.stats.groups = GroupSpec::Lists {
        groups: vec![
            NamedGroup { name: "a".into(), members: ids.clone() },
            NamedGroup { name: "b".into(), members: ids.clone() },
        ],
    };
    let out = cmd_stats(&ctx).unwrap();
    let a = out.comparison("simplicity").unwrap().anova.clone().unwrap();
    assert!(a.p_value > 0.99, "{}", a.p_value);
}

#[test]
fn entropy_corpus_smaller_than_folds_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = small_run(dir.path());
    cmd_ingest(&ctx).unwrap();
    ctx.config.entropy.folds = 500;
    assert!(cmd_entropy(&ctx).is_err());
}
