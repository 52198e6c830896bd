use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::artifact::{num, stamped_json, write_atomic, Stamp, Table};
use super::config::{DocumentUnit, RunConfig, QUALITY_COLUMNS};
use super::group::{CaseAttributes, NamedGroup};
use super::svg::{bar_chart, line_chart};
use crate::error::{Error, Result};
use crate::eventlog::{
    dedupe, parse_events, read_canonical, recode_activities, sessionize, to_sentences,
    verify_hashes, write_canonical_csv, write_canonical_jsonl, ActivityMap, Event, EventLog,
    Session,
};
use crate::ngram::{english_corpus, kfold_cross_entropy, NGramConfig, AUSTEN_SAMPLE};
use crate::process::{discover_and_evaluate, format_duration, traces, QualityMetrics};
use crate::stats::{anova_oneway, shapiro_wilk, star, tukey_hsd, AnovaResult, TukeyResult};
use crate::synth::generate_log;
use crate::topic::{
    extract_fingerprints, fit_lda, kfold_lda_entropy, DocTermMatrix, FingerprintReport,
    LdaConfig, TopicSelectionReport,
};

pub const CANONICAL_LOG: &str = "canonical.jsonl";
pub const PROCESS_QUALITY: &str = "process_quality.csv";
pub const FINGERPRINTS: &str = "fingerprints.json";
pub const SYNTHETIC_LOG: &str = "synthetic_log.jsonl";

/// A validated configuration plus the stamp its artifacts carry.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub stamp: Stamp,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let stamp = Stamp {
            seed: config.seed,
            config_digest: config.digest()?,
        };
        Ok(Context { config, stamp })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        write_atomic(&p, bytes)?;
        Ok(p)
    }

    /// The canonical log written by [`cmd_ingest`].
    pub fn load_log(&self) -> Result<EventLog> {
        let p = self.path(CANONICAL_LOG);
        let f = fs::File::open(&p).map_err(|e| {
            Error::Validation(format!("{}: {e}; run `ingest` first", p.display()))
        })?;
        let log = read_canonical(BufReader::new(f))?;
        if log.num_events() == 0 {
            return Err(Error::Empty(format!("{} has no events", p.display())));
        }
        Ok(log)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Keeps case ids usable as file names.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Attributes of each case's first event.
pub fn case_attributes(log: &EventLog) -> CaseAttributes {
    let mut out = CaseAttributes::new();
    for s in &log.sessions {
        if let Some(e) = s.events.first() {
            out.entry(s.case_id.clone()).or_insert_with(|| e.attributes.clone());
        }
    }
    out
}

/// Development sessions of one case, split on the session attribute.
fn case_sessions(log: &EventLog, case: &str, session_key: &str) -> Result<Vec<Session>> {
    let sub = EventLog::from_sessions(log.case(case).into_iter().cloned().collect());
    sessionize(&sub, session_key)
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Serialize)]
pub struct SynthOutcome {
    pub path: PathBuf,
    pub records: usize,
    pub participants: usize,
    pub sha256: String,
}

/// Writes a synthetic telemetry log (seeded by the run seed) and a stamped
/// description of its participants and profiles.
pub fn cmd_synth(ctx: &Context) -> Result<SynthOutcome> {
    let spec = crate::synth::SyntheticSpec {
        seed: ctx.config.seed,
        ..ctx.config.synth.clone()
    };
    let log = generate_log(&spec)?;
    let bytes = log.to_jsonl();
    let path = ctx.write(SYNTHETIC_LOG, &bytes)?;
    let sha256 = sha256_hex(&bytes);
    #[derive(Serialize)]
    struct Manifest<'a> {
        log_sha256: &'a str,
        spec: &'a crate::synth::SyntheticSpec,
        participants: &'a [crate::synth::Participant],
        profiles: &'a [crate::synth::Profile],
    }
    let manifest = Manifest {
        log_sha256: &sha256,
        spec: &spec,
        participants: &log.participants,
        profiles: &log.profiles,
    };
    ctx.write("synthetic_profiles.json", &stamped_json(&manifest, &ctx.stamp)?)?;
    Ok(SynthOutcome {
        path,
        records: log.records.len(),
        participants: log.participants.len(),
        sha256,
    })
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TamperSummary {
    pub ok: usize,
    pub mismatched: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    /// File names and content digests; directories are left out so the
    /// summary does not depend on where the inputs live.
    pub inputs: Vec<InputFile>,
    pub records: usize,
    pub rejected: usize,
    pub duplicates: usize,
    pub events: usize,
    pub cases: usize,
    pub tamper: Option<TamperSummary>,
    pub activities: BTreeMap<String, usize>,
    pub canonical_sha256: String,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Parses, checks, deduplicates and recodes the input logs, then writes the
/// canonical log.
pub fn cmd_ingest(ctx: &Context) -> Result<IngestOutcome> {
    let input = &ctx.config.input;
    if input.paths.is_empty() {
        return Err(Error::arg("no input paths"));
    }
    let map = match &input.activity_map {
        Some(p) => ActivityMap::from_csv(fs::File::open(p).map_err(|e| {
            Error::Validation(format!("activity map {}: {e}", p.display()))
        })?)?,
        None => ActivityMap::default(),
    };
    let mut events: Vec<Event> = Vec::new();
    let mut rejected = 0;
    let mut warnings = Vec::new();
    let mut inputs = Vec::new();
    for p in &input.paths {
        let bytes = fs::read(p).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
        })?;
        inputs.push(InputFile {
            name: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        });
        let parsed = parse_events(&bytes, &input.case_key)?;
        for r in &parsed.rejected {
            warnings.push(format!("{}: {r}", p.display()));
        }
        rejected += parsed.rejected.len();
        let offset = events.len();
        let mut batch: Vec<Event> = parsed.log.events_in_input_order().into_iter().cloned().collect();
        for (i, e) in batch.iter_mut().enumerate() {
            e.seq = offset + i;
        }
        events.extend(batch);
    }
    let records = events.len() + rejected;
    let raw = EventLog::from_events(events, &input.case_key)?;
    let tamper = input.secret.as_ref().map(|s| {
        let r = verify_hashes(&raw, s.as_bytes());
        TamperSummary {
            ok: r.ok,
            mismatched: r.mismatched,
            missing: r.missing,
        }
    });
    if let Some(t) = &tamper {
        if t.mismatched > 0 {
            warnings.push(format!("{} events fail the tamper check", t.mismatched));
        }
    }
    let deduped = if input.dedupe { dedupe(&raw) } else { raw.clone() };
    let duplicates = raw.num_events() - deduped.num_events();
    let log = recode_activities(&deduped, &map);
    let mut jsonl = Vec::new();
    write_canonical_jsonl(&log, &mut jsonl)?;
    let mut csv = Vec::new();
    write_canonical_csv(&log, &mut csv)?;
    ctx.write(CANONICAL_LOG, &jsonl)?;
    ctx.write("canonical.csv", &csv)?;
    let mut activities = BTreeMap::new();
    for e in log.events() {
        *activities.entry(e.activity.clone()).or_default() += 1;
    }
    let out = IngestOutcome {
        inputs,
        records,
        rejected,
        duplicates,
        events: log.num_events(),
        cases: log.case_ids().len(),
        tamper,
        activities,
        canonical_sha256: sha256_hex(&jsonl),
        warnings,
    };
    ctx.write("ingest_summary.json", &stamped_json(&out, &ctx.stamp)?)?;
    Ok(out)
}

// ---------------------------------------------------------------- entropy

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub source: String,
    pub n: usize,
    pub mean_bits: f64,
    pub std_bits: f64,
}

/// k-fold n-gram entropy of development sessions at each token level, plus
/// a plain-text reference corpus.
pub fn cmd_entropy(ctx: &Context) -> Result<Vec<EntropyRow>> {
    let cfg = &ctx.config.entropy;
    let log = ctx.load_log()?;
    let sessions = sessionize(&log, &ctx.config.input.session_key)?;
    let base = NGramConfig::new(1)
        .smoothing(cfg.smoothing)
        .min_count(cfg.min_count);
    let mut corpora = Vec::new();
    for &level in &cfg.levels {
        corpora.push((level.to_string(), to_sentences(&sessions, level)?));
    }
    let reference = match &cfg.reference_text {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| {
            Error::Validation(format!("reference text {}: {e}", p.display()))
        })?),
        None if cfg.builtin_reference => Some(AUSTEN_SAMPLE.to_owned()),
        None => None,
    };
    if let Some(text) = reference {
        corpora.push(("english".into(), english_corpus(&text)));
    }
    let mut summary = Table::new(&[
        "source", "n", "smoothing", "mean_bits", "std_bits", "perplexity", "tokens", "oov_rate",
    ]);
    let mut folds = Table::new(&["source", "n", "fold", "entropy_bits", "perplexity", "tokens", "oov"]);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (source, corpus) in &corpora {
        let reports = kfold_cross_entropy(corpus, &cfg.orders, cfg.folds, ctx.config.seed, base)?;
        let mut pts = Vec::new();
        for r in &reports {
            summary.push(vec![
                source.clone(),
                r.n.to_string(),
                r.smoothing.clone(),
                num(r.mean),
                num(r.std),
                num(r.perplexity),
                r.tokens.to_string(),
                num(r.oov_rate()),
            ]);
            for f in &r.folds {
                folds.push(vec![
                    source.clone(),
                    r.n.to_string(),
                    f.fold.to_string(),
                    num(f.entropy_bits),
                    num(f.perplexity),
                    f.tokens.to_string(),
                    f.oov.to_string(),
                ]);
            }
            pts.push((r.n as f64, r.mean));
            rows.push(EntropyRow {
                source: source.clone(),
                n: r.n,
                mean_bits: r.mean,
                std_bits: r.std,
            });
        }
        series.push((source.clone(), pts));
    }
    ctx.write("entropy.csv", &summary.to_csv(&ctx.stamp)?)?;
    ctx.write("entropy_folds.csv", &folds.to_csv(&ctx.stamp)?)?;
    let svg = line_chart(
        "Cross-entropy by n-gram order",
        "n",
        "bits per token",
        &series,
        &ctx.stamp,
    );
    ctx.write("entropy.svg", svg.as_bytes())?;
    Ok(rows)
}

// ---------------------------------------------------------------- topics

#[derive(Debug, Clone, Serialize)]
pub struct TopicsOutcome {
    pub selections: Vec<TopicSelectionReport>,
    pub fingerprint_order: usize,
    pub fingerprints: FingerprintReport,
    pub documents: usize,
}

/// One document per case or per session, activity tokens in time order.
pub fn documents(ctx: &Context, log: &EventLog) -> Result<Vec<(String, Vec<String>)>> {
    let docs = match ctx.config.topics.documents {
        DocumentUnit::Case => log
            .case_ids()
            .into_iter()
            .map(|id| {
                let mut events: Vec<&Event> = log.case(id).into_iter().flat_map(|s| &s.events).collect();
                events.sort_by_key(|e| (e.timestamp, e.seq));
                (id.to_owned(), events.iter().map(|e| e.activity.clone()).collect())
            })
            .collect(),
        DocumentUnit::Session => sessionize(log, &ctx.config.input.session_key)?
            .into_iter()
            .map(|s| {
                let tokens = s.activities().map(str::to_owned).collect();
                (s.case_id, tokens)
            })
            .collect(),
    };
    Ok(docs)
}

fn lda_base(ctx: &Context) -> LdaConfig {
    let t = &ctx.config.topics;
    LdaConfig {
        k: t.k_min,
        alpha: t.alpha,
        beta: t.beta,
        iterations: t.iterations,
        burn_in: t.burn_in,
        seed: ctx.config.seed,
    }
}

/// Topic-count scan at each n-gram order, fingerprints from the chosen
/// model, and optionally held-out entropy curves.
pub fn cmd_topics(ctx: &Context) -> Result<TopicsOutcome> {
    let t = &ctx.config.topics;
    let log = ctx.load_log()?;
    let docs = documents(ctx, &log)?;
    let base = lda_base(ctx);
    let mut table = Table::new(&["k", "ngram_order", "metric", "raw", "normalized"]);
    let mut heldout = Table::new(&["k", "ngram_order", "fold", "entropy_bits"]);
    let mut heldout_series = Vec::new();
    let mut selections = Vec::new();
    let mut fp_dtm = None;
    let mut n_docs = 0;
    for &w in &t.orders {
        let dtm = DocTermMatrix::build(&docs, w)?;
        n_docs = n_docs.max(dtm.num_docs());
        let k_max = t.k_max.min(dtm.num_docs());
        if t.k_min > k_max {
            return Err(Error::Validation(format!(
                "k_min = {} exceeds the {} documents at order {w}",
                t.k_min,
                dtm.num_docs()
            )));
        }
        let ks: Vec<usize> = (t.k_min..=k_max).collect();
        let report = crate::topic::select_k(&dtm, &ks, &t.metrics, base)?;
        for r in &report.rows {
            table.push(vec![
                r.k.to_string(),
                r.ngram_order.to_string(),
                r.metric.to_string(),
                num(r.raw),
                num(r.normalized),
            ]);
        }
        let series: Vec<(String, Vec<(f64, f64)>)> = t
            .metrics
            .iter()
            .map(|&m| {
                let pts = report
                    .rows
                    .iter()
                    .filter(|r| r.metric == m)
                    .map(|r| (r.k as f64, r.normalized))
                    .collect();
                (m.to_string(), pts)
            })
            .collect();
        let svg = line_chart(
            &format!("Topic-count metrics, {w}-grams (chosen k = {})", report.chosen_k),
            "k",
            "normalized",
            &series,
            &ctx.stamp,
        );
        ctx.write(&format!("topic_selection_w{w}.svg"), svg.as_bytes())?;
        if t.heldout {
            let hk: Vec<usize> = ks.iter().copied().filter(|&k| k < dtm.num_docs()).collect();
            let ent = kfold_lda_entropy(&dtm, &hk, t.folds, base)?;
            for e in &ent {
                for (f, h) in e.folds.iter().enumerate() {
                    heldout.push(vec![e.k.to_string(), w.to_string(), f.to_string(), num(*h)]);
                }
            }
            heldout_series.push((
                format!("w={w}"),
                ent.iter().map(|e| (e.k as f64, e.mean)).collect(),
            ));
        }
        if w == t.fingerprint_order {
            fp_dtm = Some((dtm, report.chosen_k));
        }
        selections.push(report);
    }
    ctx.write("topic_selection.csv", &table.to_csv(&ctx.stamp)?)?;
    if t.heldout {
        ctx.write("lda_entropy.csv", &heldout.to_csv(&ctx.stamp)?)?;
        let svg = line_chart(
            "Held-out LDA entropy",
            "k",
            "bits per term",
            &heldout_series,
            &ctx.stamp,
        );
        ctx.write("lda_entropy.svg", svg.as_bytes())?;
    }
    #[derive(Serialize)]
    struct Choice {
        ngram_order: usize,
        chosen_k: usize,
        best_k: BTreeMap<String, Option<usize>>,
    }
    let choices: Vec<Choice> = selections
        .iter()
        .map(|r| Choice {
            ngram_order: r.ngram_order,
            chosen_k: r.chosen_k,
            best_k: t.metrics.iter().map(|&m| (m.to_string(), r.best_k(m))).collect(),
        })
        .collect();
    #[derive(Serialize)]
    struct Choices<'a> {
        orders: &'a [Choice],
    }
    ctx.write("topic_choice.json", &stamped_json(&Choices { orders: &choices }, &ctx.stamp)?)?;

    let (dtm, k) = fp_dtm.expect("fingerprint order validated");
    let model = fit_lda(&dtm, LdaConfig { k, ..base })?;
    let fingerprints = extract_fingerprints(&model, t.top_n);
    #[derive(Serialize)]
    struct FpOut<'a> {
        ngram_order: usize,
        distinct: usize,
        #[serde(flatten)]
        report: &'a FingerprintReport,
    }
    let fp = FpOut {
        ngram_order: t.fingerprint_order,
        distinct: fingerprints.distinct(),
        report: &fingerprints,
    };
    ctx.write(FINGERPRINTS, &stamped_json(&fp, &ctx.stamp)?)?;
    for f in &fingerprints.fingerprints {
        let svg = bar_chart(
            &format!("Fingerprint {} ({} members)", f.topic, f.members.len()),
            "probability",
            &f.top_terms,
            &ctx.stamp,
        );
        ctx.write(&format!("fingerprint_{}.svg", f.topic), svg.as_bytes())?;
    }
    Ok(TopicsOutcome {
        selections,
        fingerprint_order: t.fingerprint_order,
        fingerprints,
        documents: n_docs,
    })
}

// ---------------------------------------------------------------- process

#[derive(Debug, Clone, Serialize)]
pub struct CaseQuality {
    pub case: String,
    pub group: String,
    pub fingerprint: String,
    pub metrics: QualityMetrics,
}

fn quality_row(name: &str, group: &str, fp: &str, m: &QualityMetrics) -> Vec<String> {
    vec![
        name.to_owned(),
        group.to_owned(),
        fp.to_owned(),
        m.interactions.to_string(),
        num(m.fitness),
        num(m.precision),
        num(m.generalization),
        num(m.simplicity),
        num(m.average),
    ]
}

const QUALITY_HEADER: [&str; 9] = [
    "case",
    "group",
    "fingerprint",
    "interactions",
    "fitness",
    "precision",
    "generalization",
    "simplicity",
    "average",
];

fn load_assignment(ctx: &Context) -> BTreeMap<String, String> {
    let Ok(bytes) = fs::read(ctx.path(FINGERPRINTS)) else {
        return BTreeMap::new();
    };
    let v: serde_json::Value = match serde_json::from_slice(&bytes) {
        Ok(v) => v,
        Err(_) => return BTreeMap::new(),
    };
    v.get("assignment")
        .and_then(|a| a.as_object())
        .map(|a| {
            a.iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

fn group_labels(ctx: &Context, attrs: &CaseAttributes) -> BTreeMap<String, String> {
    match ctx.config.stats.groups.assign(attrs) {
        Ok(groups) => groups
            .into_iter()
            .flat_map(|g| g.members.into_iter().map(move |m| (m, g.name.clone())))
            .collect(),
        Err(e) => {
            log::warn!("grouping skipped: {e}");
            BTreeMap::new()
        }
    }
}

/// Discovers and scores one process model per case, and one per value of
/// the `group_by` attribute.
pub fn cmd_process(ctx: &Context) -> Result<Vec<CaseQuality>> {
    let cfg = &ctx.config.process;
    let key = &ctx.config.input.session_key;
    let log = ctx.load_log()?;
    let attrs = case_attributes(&log);
    let groups = group_labels(ctx, &attrs);
    let fps = load_assignment(ctx);
    let ids: Vec<String> = log.case_ids().into_iter().map(str::to_owned).collect();
    let case_traces: Vec<Vec<Vec<String>>> = ids
        .iter()
        .map(|id| case_sessions(&log, id, key).map(|s| traces(&s)))
        .collect::<Result<_>>()?;
    let models: Vec<Result<crate::process::ProcessModel>> = case_traces
        .par_iter()
        .map(|tr| {
            let n = tr.iter().map(Vec::len).sum::<usize>() as u64;
            discover_and_evaluate(tr, n, cfg.min_edge_freq)
        })
        .collect();
    let mut table = Table::new(&QUALITY_HEADER);
    let mut timings = String::new();
    let mut out = Vec::new();
    for (id, model) in ids.iter().zip(models) {
        let model = model?;
        let group = groups.get(id).cloned().unwrap_or_default();
        let fp = fps.get(id).cloned().unwrap_or_default();
        table.push(quality_row(id, &group, &fp, &model.metrics));
        timings.push_str(&format!("{id}\t{}\n", format_duration(model.metrics.duration)));
        if cfg.export_dot {
            let stem = file_stem(id);
            let dot = format!("// {}\n{}", ctx.stamp.comment(), model.net.to_dot());
            ctx.write(&format!("nets/{stem}.dot"), dot.as_bytes())?;
            let mut edges = Vec::new();
            model.dfg.write_edges_csv(&mut edges)?;
            ctx.write(&format!("nets/{stem}_dfg.csv"), &edges)?;
        }
        out.push(CaseQuality {
            case: id.clone(),
            group,
            fingerprint: fp,
            metrics: model.metrics,
        });
    }
    ctx.write(PROCESS_QUALITY, &table.to_csv(&ctx.stamp)?)?;

    if let Some(by) = &cfg.group_by {
        let mut pooled: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        let mut missing = 0;
        for (id, tr) in ids.iter().zip(&case_traces) {
            match attrs.get(id).and_then(|a| a.get(by)) {
                Some(v) => pooled.entry(v.clone()).or_default().extend(tr.iter().cloned()),
                None => missing += 1,
            }
        }
        if missing > 0 {
            log::warn!("{missing} cases have no `{by}` attribute and are left out of group models");
        }
        let mut gt = Table::new(&QUALITY_HEADER);
        for (value, tr) in &pooled {
            let n = tr.iter().map(Vec::len).sum::<usize>() as u64;
            let m = discover_and_evaluate(tr, n, cfg.min_edge_freq)?;
            gt.push(quality_row(value, &format!("by {by}"), "", &m.metrics));
            timings.push_str(&format!("{by}={value}\t{}\n", format_duration(m.metrics.duration)));
        }
        ctx.write("process_groups.csv", &gt.to_csv(&ctx.stamp)?)?;
    }
    ctx.write("process_timings.log", timings.as_bytes())?;
    Ok(out)
}

// ---------------------------------------------------------------- stats

#[derive(Debug, Clone, Serialize)]
pub struct MetricComparison {
    pub metric: String,
    pub groups: Vec<(String, usize, f64)>,
    pub anova: Option<AnovaResult>,
    pub tukey: Option<TukeyResult>,
    /// Shapiro–Wilk `(group, W, p)` where the test applies.
    pub normality: Vec<(String, Option<(f64, f64)>)>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsOutcome {
    pub groups: Vec<NamedGroup>,
    pub comparisons: Vec<MetricComparison>,
}

impl StatsOutcome {
    pub fn comparison(&self, metric: &str) -> Option<&MetricComparison> {
        self.comparisons.iter().find(|c| c.metric == metric)
    }
}

fn read_quality(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| {
        Error::Validation(format!("{}: {e}; run `process` first", path.display()))
    })?;
    let header = r.headers()?.clone();
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let mut vals = BTreeMap::new();
        for col in QUALITY_COLUMNS {
            if let Some(i) = header.iter().position(|h| h == col) {
                let x: f64 = rec[i].parse().map_err(|_| {
                    Error::Validation(format!("{}: bad {col} value {:?}", path.display(), &rec[i]))
                })?;
                vals.insert(col.to_owned(), x);
            }
        }
        out.insert(rec[0].to_owned(), vals);
    }
    Ok(out)
}

/// One-way ANOVA with Tukey post-hoc and per-group normality tests, for
/// each configured quality metric across the configured groups.
///
/// Fails with a numerical error only when no metric could be tested; the
/// reports are written either way.
pub fn cmd_stats(ctx: &Context) -> Result<StatsOutcome> {
    let cfg = &ctx.config.stats;
    let log = ctx.load_log()?;
    let attrs = case_attributes(&log);
    let quality = read_quality(&ctx.path(PROCESS_QUALITY))?;
    let groups = cfg.groups.assign(&attrs)?;
    if groups.len() < 2 {
        return Err(Error::Validation(format!(
            "grouping yields {} non-empty group(s); need at least 2",
            groups.len()
        )));
    }
    let mut comparisons = Vec::new();
    for metric in &cfg.metrics {
        let values: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                g.members
                    .iter()
                    .filter_map(|m| quality.get(m).and_then(|q| q.get(metric)).copied())
                    .collect()
            })
            .collect();
        let summary = groups
            .iter()
            .zip(&values)
            .map(|(g, v)| (g.name.clone(), v.len(), v.iter().sum::<f64>() / v.len().max(1) as f64))
            .collect();
        let normality = groups
            .iter()
            .zip(&values)
            .map(|(g, v)| (g.name.clone(), shapiro_wilk(v).ok().map(|r| (r.w, r.p_value))))
            .collect();
        let (anova, tukey, note) = match anova_oneway(&values) {
            Ok(a) => match tukey_hsd(&values, cfg.alpha) {
                Ok(t) => (Some(a), Some(t), None),
                Err(e) => (Some(a), None, Some(e.to_string())),
            },
            Err(e) => (None, None, Some(e.to_string())),
        };
        comparisons.push(MetricComparison {
            metric: metric.clone(),
            groups: summary,
            anova,
            tukey,
            normality,
            note,
        });
    }
    let out = StatsOutcome { groups, comparisons };
    write_stats(ctx, &out)?;
    if out.comparisons.iter().all(|c| c.anova.is_none()) {
        return Err(Error::Numerical("no metric could be compared across groups".into()));
    }
    Ok(out)
}

fn write_stats(ctx: &Context, out: &StatsOutcome) -> Result<()> {
    let alpha = ctx.config.stats.alpha;
    let mut anova = Table::new(&[
        "metric", "df_between", "df_within", "ss_between", "ss_within", "ms_between", "ms_within",
        "f", "p_value", "significant", "note",
    ]);
    let mut tukey = Table::new(&["metric", "pair", "diff", "lower", "upper", "p_adj", "significant"]);
    let mut shapiro = Table::new(&["metric", "group", "n", "w", "p_value"]);
    let mut md = String::from("# Group comparison\n\n");
    md.push_str("| group | members |\n|---|---|\n");
    for g in &out.groups {
        md.push_str(&format!("| {} | {} |\n", g.name, g.members.len()));
    }
    for c in &out.comparisons {
        md.push_str(&format!("\n## {}\n\n", c.metric));
        md.push_str("| group | n | mean | Shapiro-Wilk W | p |\n|---|---|---|---|---|\n");
        for ((name, n, mean), (_, sw)) in c.groups.iter().zip(&c.normality) {
            let (w, p) = sw.map(|(w, p)| (num(w), num(p))).unwrap_or(("NA".into(), "NA".into()));
            let (mw, mp) = sw
                .map(|(w, p)| (format!("{w:.4}"), format!("{p:.4}")))
                .unwrap_or(("NA".into(), "NA".into()));
            md.push_str(&format!("| {name} | {n} | {mean:.6} | {mw} | {mp} |\n"));
            shapiro.push(vec![c.metric.clone(), name.clone(), n.to_string(), w, p]);
        }
        match &c.anova {
            Some(a) => {
                anova.push(vec![
                    c.metric.clone(),
                    a.df_between.to_string(),
                    a.df_within.to_string(),
                    num(a.ss_between),
                    num(a.ss_within),
                    num(a.ms_between),
                    num(a.ms_within),
                    num(a.f),
                    num(a.p_value),
                    star(a.p_value, alpha).to_owned(),
                    c.note.clone().unwrap_or_default(),
                ]);
                md.push_str(&format!(
                    "\n| | Df | Sum Sq | Mean Sq | F value | Pr(>F) |\n|---|---|---|---|---|---|\n\
                     | groups | {} | {:.6} | {:.6} | {:.4} | {:.6}{} |\n\
                     | residuals | {} | {:.6} | {:.6} | | |\n",
                    a.df_between,
                    a.ss_between,
                    a.ms_between,
                    a.f,
                    a.p_value,
                    star(a.p_value, alpha),
                    a.df_within,
                    a.ss_within,
                    a.ms_within
                ));
            }
            None => {
                let note = c.note.clone().unwrap_or_default();
                let mut row = vec![c.metric.clone()];
                row.extend(std::iter::repeat_n("NA".to_string(), 9));
                row.push(note.clone());
                anova.push(row);
                md.push_str(&format!("\nNot tested: {note}\n"));
            }
        }
        if let Some(t) = &c.tukey {
            md.push_str(&format!(
                "\nTukey HSD ({:.0}% family-wise confidence)\n\n| pair | diff | lwr | upr | p adj |\n|---|---|---|---|---|\n",
                (1.0 - alpha) * 100.0
            ));
            for p in &t.pairs {
                let label = format!("{}-{}", c.groups[p.j].0, c.groups[p.i].0);
                md.push_str(&format!(
                    "| {label} | {:.8} | {:.8} | {:.8} | {:.7}{} |\n",
                    p.diff,
                    p.lower,
                    p.upper,
                    p.p_adj,
                    star(p.p_adj, alpha)
                ));
                tukey.push(vec![
                    c.metric.clone(),
                    label,
                    num(p.diff),
                    num(p.lower),
                    num(p.upper),
                    num(p.p_adj),
                    star(p.p_adj, alpha).to_owned(),
                ]);
            }
        }
    }
    md.push_str(&format!("\n---\n{}\n", ctx.stamp.comment()));
    ctx.write("stats_anova.csv", &anova.to_csv(&ctx.stamp)?)?;
    ctx.write("stats_tukey.csv", &tukey.to_csv(&ctx.stamp)?)?;
    ctx.write("stats_shapiro.csv", &shapiro.to_csv(&ctx.stamp)?)?;
    ctx.write("stats.md", md.as_bytes())?;
    let svg_bars: Vec<(String, f64)> = out
        .comparisons
        .iter()
        .flat_map(|c| c.groups.iter().map(move |(g, _, m)| (format!("{} {g}", c.metric), *m)))
        .collect();
    let svg = bar_chart("Group means", "mean", &svg_bars, &ctx.stamp);
    ctx.write("stats_means.svg", svg.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Serialize)]
pub struct ReportOutcome {
    pub ingest: IngestOutcome,
    pub entropy: Vec<EntropyRow>,
    pub topics: TopicsOutcome,
    pub cases: usize,
    pub stats: StatsOutcome,
}

/// ingest → entropy → topics → process → stats, then an index page.
pub fn cmd_report(ctx: &Context) -> Result<ReportOutcome> {
    let t0 = Instant::now();
    let ingest = cmd_ingest(ctx)?;
    let entropy = cmd_entropy(ctx)?;
    let topics = cmd_topics(ctx)?;
    let cases = cmd_process(ctx)?.len();
    let stats = cmd_stats(ctx)?;
    let mut md = String::from("# devprint report\n\n");
    md.push_str(&format!(
        "- events: {} in {} cases ({} rejected, {} duplicates)\n",
        ingest.events, ingest.cases, ingest.rejected, ingest.duplicates
    ));
    if let Some(t) = &ingest.tamper {
        md.push_str(&format!("- tamper check: {} ok, {} mismatched, {} missing\n", t.ok, t.mismatched, t.missing));
    }
    for s in &topics.selections {
        md.push_str(&format!("- topics, {}-grams: chosen k = {}\n", s.ngram_order, s.chosen_k));
    }
    md.push_str(&format!(
        "- fingerprints: {} distinct at k = {}\n",
        topics.fingerprints.distinct(),
        topics.fingerprints.k
    ));
    for c in &stats.comparisons {
        if let Some(a) = &c.anova {
            md.push_str(&format!(
                "- {}: F({}, {}) = {:.3}, p = {:.4}{}\n",
                c.metric,
                a.df_between,
                a.df_within,
                a.f,
                a.p_value,
                star(a.p_value, ctx.config.stats.alpha)
            ));
        }
    }
    md.push_str("\nArtifacts: `entropy.csv`, `topic_selection.csv`, `fingerprints.json`, \
                 `process_quality.csv`, `stats.md`, plus SVG charts and DOT nets.\n");
    md.push_str(&format!("\n---\n{}\n", ctx.stamp.comment()));
    ctx.write("report.md", md.as_bytes())?;
    log::info!("report finished in {:.1?}", t0.elapsed());
    Ok(ReportOutcome {
        ingest,
        entropy,
        topics,
        cases,
        stats,
    })
}
