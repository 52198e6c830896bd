use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use devprint::eventlog::Level;
use devprint::ngram::Smoothing;
use devprint::pipeline::{
    cmd_entropy, cmd_ingest, cmd_process, cmd_report, cmd_stats, cmd_synth, cmd_topics, Context,
    DocumentUnit, GroupSpec, RunConfig,
};
use devprint::topic::Metric;
use devprint::Error;

/// Developer fingerprints from IDE event logs.
#[derive(Debug, Parser)]
#[command(name = "devprint", version)]
struct Cli {
    /// TOML configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also DEVPRINT_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, verify, deduplicate and recode raw logs into the canonical log.
    Ingest(InputArgs),
    /// k-fold n-gram cross-entropy of development sessions.
    Entropy(EntropyArgs),
    /// Topic-count selection and fingerprints.
    Topics(TopicArgs),
    /// Per-case process discovery and quality metrics.
    Process(ProcessArgs),
    /// ANOVA, Tukey HSD and Shapiro-Wilk across groups of cases.
    Stats(StatsArgs),
    /// Write a synthetic telemetry log with planted behaviour profiles.
    Synth(SynthArgs),
    /// Run every stage from ingest to stats.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Raw JSON or JSON-lines event logs.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    case_key: Option<String>,
    #[arg(long)]
    session_key: Option<String>,
    #[arg(long)]
    activity_map: Option<PathBuf>,
    /// Shared secret for the tamper check.
    #[arg(long, env = "DEVPRINT_SECRET", hide_env_values = true)]
    secret: Option<String>,
    #[arg(long)]
    no_dedupe: bool,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    /// n-gram orders, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    /// Token levels: activity, category, command.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<Level>>,
    /// katz, katz:CUTOFF, mle or add:K.
    #[arg(long, value_parser = parse_smoothing)]
    smoothing: Option<Smoothing>,
    /// Plain-text corpus scored alongside the sessions.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TopicArgs {
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// n-gram orders of the documents, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    topic_orders: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// One document per case or per session.
    #[arg(long, value_parser = parse_unit)]
    documents: Option<DocumentUnit>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Skip the held-out entropy scan.
    #[arg(long)]
    no_heldout: bool,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    #[arg(long)]
    min_edge_freq: Option<u64>,
    /// Attribute for pooled group models, e.g. graduation.
    #[arg(long)]
    group_by: Option<String>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// rank:KEY:N, quantile:KEY:LOWER:UPPER or attribute:KEY.
    #[arg(long, value_parser = parse_groups)]
    groups: Option<GroupSpec>,
    #[arg(long, value_delimiter = ',')]
    quality: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    participants: Option<usize>,
    #[arg(long)]
    profiles: Option<usize>,
    /// Secret used to sign the records.
    #[arg(long)]
    sign_with: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    entropy: EntropyArgs,
    #[command(flatten)]
    topics: TopicArgs,
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    stats: StatsArgs,
}

fn parse_smoothing(s: &str) -> Result<Smoothing, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match (name, arg) {
        ("mle", None) => Ok(Smoothing::Mle),
        ("katz", None) => Ok(Smoothing::default()),
        ("katz", Some(c)) => c.parse().map(|cutoff| Smoothing::Katz { cutoff }).map_err(|e| e.to_string()),
        ("add", Some(k)) => k.parse().map(|k| Smoothing::AddK { k }).map_err(|e| format!("{e}")),
        _ => Err(format!("unknown smoothing `{s}`")),
    }
}

fn parse_unit(s: &str) -> Result<DocumentUnit, String> {
    match s {
        "case" => Ok(DocumentUnit::Case),
        "session" => Ok(DocumentUnit::Session),
        _ => Err(format!("expected `case` or `session`, got `{s}`")),
    }
}

fn parse_groups(s: &str) -> Result<GroupSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |e: &dyn std::fmt::Display| format!("{s}: {e}");
    match parts.as_slice() {
        ["rank", key, n] => Ok(GroupSpec::Rank {
            key: key.to_string(),
            n: n.parse().map_err(|e| bad(&e))?,
        }),
        ["quantile", key, lo, hi] => Ok(GroupSpec::Quantile {
            key: key.to_string(),
            lower: lo.parse().map_err(|e| bad(&e))?,
            upper: hi.parse().map_err(|e| bad(&e))?,
        }),
        ["attribute", key] => Ok(GroupSpec::Attribute { key: key.to_string() }),
        _ => Err(format!("unrecognized grouping `{s}`")),
    }
}

impl InputArgs {
    fn apply(self, c: &mut RunConfig) {
        if !self.inputs.is_empty() {
            c.input.paths = self.inputs;
        }
        set(&mut c.input.case_key, self.case_key);
        set(&mut c.input.session_key, self.session_key);
        if self.activity_map.is_some() {
            c.input.activity_map = self.activity_map;
        }
        if self.secret.is_some() {
            c.input.secret = self.secret;
        }
        if self.no_dedupe {
            c.input.dedupe = false;
        }
    }
}

impl EntropyArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.entropy.orders, self.orders);
        set(&mut c.entropy.folds, self.folds);
        set(&mut c.entropy.levels, self.levels);
        set(&mut c.entropy.smoothing, self.smoothing);
        if self.reference.is_some() {
            c.entropy.reference_text = self.reference;
        }
    }
}

impl TopicArgs {
    fn apply(self, c: &mut RunConfig) {
        let t = &mut c.topics;
        set(&mut t.k_min, self.k_min);
        set(&mut t.k_max, self.k_max);
        if let Some(o) = self.topic_orders {
            if !o.contains(&t.fingerprint_order) {
                t.fingerprint_order = o[0];
            }
            t.orders = o;
        }
        set(&mut t.metrics, self.metrics);
        set(&mut t.iterations, self.iterations);
        set(&mut t.burn_in, self.burn_in);
        set(&mut t.documents, self.documents);
        set(&mut t.top_n, self.top_n);
        if self.no_heldout {
            t.heldout = false;
        }
    }
}

impl ProcessArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.process.min_edge_freq, self.min_edge_freq);
        if self.group_by.is_some() {
            c.process.group_by = self.group_by;
        }
    }
}

impl StatsArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.stats.groups, self.groups);
        set(&mut c.stats.metrics, self.quality);
        set(&mut c.stats.alpha, self.alpha);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Numerical(_) | Error::ZeroProbability { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_env();
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    set(&mut config.seed, cli.seed);
    match cli.command {
        Command::Ingest(a) => {
            a.apply(&mut config);
            let o = cmd_ingest(&Context::new(config)?)?;
            for w in &o.warnings {
                log::warn!("{w}");
            }
            println!(
                "ingested {} events in {} cases ({} rejected, {} duplicates)",
                o.events, o.cases, o.rejected, o.duplicates
            );
            if let Some(t) = o.tamper {
                println!("tamper check: {} ok, {} mismatched, {} missing hash", t.ok, t.mismatched, t.missing);
                if t.mismatched > 0 {
                    eprintln!("warning: {} events fail the tamper check", t.mismatched);
                }
            }
        }
        Command::Entropy(a) => {
            a.apply(&mut config);
            for r in cmd_entropy(&Context::new(config)?)? {
                println!("{:<9} n={} {:.4} ± {:.4} bits", r.source, r.n, r.mean_bits, r.std_bits);
            }
        }
        Command::Topics(a) => {
            a.apply(&mut config);
            let o = cmd_topics(&Context::new(config)?)?;
            for s in &o.selections {
                println!("{}-grams: chosen k = {}", s.ngram_order, s.chosen_k);
            }
            println!(
                "{} distinct fingerprints over {} documents",
                o.fingerprints.distinct(),
                o.fingerprints.assignment.len()
            );
        }
        Command::Process(a) => {
            a.apply(&mut config);
            let rows = cmd_process(&Context::new(config)?)?;
            println!("evaluated {} process models", rows.len());
        }
        Command::Stats(a) => {
            a.apply(&mut config);
            print_stats(&cmd_stats(&Context::new(config)?)?);
        }
        Command::Synth(a) => {
            set(&mut config.synth.participants, a.participants);
            set(&mut config.synth.profiles, a.profiles);
            set(&mut config.synth.secret, a.sign_with);
            let o = cmd_synth(&Context::new(config)?)?;
            println!(
                "wrote {} records for {} participants to {}",
                o.records,
                o.participants,
                o.path.display()
            );
        }
        Command::Report(a) => {
            a.input.apply(&mut config);
            a.entropy.apply(&mut config);
            a.topics.apply(&mut config);
            a.process.apply(&mut config);
            a.stats.apply(&mut config);
            let ctx = Context::new(config)?;
            let o = cmd_report(&ctx)?;
            println!("{} events, {} cases", o.ingest.events, o.cases);
            print_stats(&o.stats);
            println!("report: {}", ctx.path("report.md").display());
        }
    }
    Ok(())
}

fn print_stats(o: &devprint::pipeline::StatsOutcome) {
    for c in &o.comparisons {
        match &c.anova {
            Some(a) => println!(
                "{:<15} F({}, {}) = {:.3}  p = {:.4}",
                c.metric, a.df_between, a.df_within, a.f, a.p_value
            ),
            None => println!("{:<15} not tested: {}", c.metric, c.note.as_deref().unwrap_or("")),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
