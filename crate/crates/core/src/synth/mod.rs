//! Seeded synthetic data: planted-topic corpora, Markov session corpora and
//! telemetry logs with planted behaviour profiles.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{event_digest, format_timestamp, parse_timestamp, Corpus, Level, SPURIOUS};

/// Documents drawn from `topics` topics with disjoint supports.
#[derive(Debug, Clone)]
pub struct PlantedTopics {
    pub docs: Vec<(String, Vec<String>)>,
    /// Term names, sorted; the column order of `phi`.
    pub terms: Vec<String>,
    /// True topic-term distributions.
    pub phi: Vec<Vec<f64>>,
    /// Dominant topic of each document.
    pub dominant: Vec<usize>,
}

/// Each topic owns `terms_per_topic` terms with geometrically decaying
/// weights. Each document puts `purity` of its mass on one topic (assigned
/// round-robin) and spreads the rest evenly.
pub fn planted_topics(
    seed: u64,
    n_docs: usize,
    topics: usize,
    terms_per_topic: usize,
    doc_len: usize,
    purity: f64,
) -> PlantedTopics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |t: usize, j: usize| format!("t{t}w{j:02}");
    let mut terms: Vec<String> = (0..topics)
        .flat_map(|t| (0..terms_per_topic).map(move |j| name(t, j)))
        .collect();
    terms.sort();
    let weights: Vec<f64> = {
        let raw: Vec<f64> = (0..terms_per_topic).map(|j| 0.85f64.powi(j as i32)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let phi = (0..topics)
        .map(|t| {
            terms
                .iter()
                .map(|term| {
                    (0..terms_per_topic)
                        .find(|&j| *term == name(t, j))
                        .map_or(0.0, |j| weights[j])
                })
                .collect()
        })
        .collect();
    let other = if topics > 1 { (1.0 - purity) / (topics - 1) as f64 } else { 0.0 };
    let mut docs = Vec::with_capacity(n_docs);
    let mut dominant = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let main = d % topics;
        let words = (0..doc_len)
            .map(|_| {
                let mut u: f64 = rng.random();
                let mut t = topics - 1;
                for c in 0..topics {
                    let p = if c == main { purity } else { other };
                    if u < p {
                        t = c;
                        break;
                    }
                    u -= p;
                }
                let j = sample(&weights, &mut rng);
                name(t, j)
            })
            .collect();
        docs.push((format!("doc{d:03}"), words));
        dominant.push(main);
    }
    PlantedTopics {
        docs,
        terms,
        phi,
        dominant,
    }
}

/// Index drawn from unnormalized `weights`.
pub fn sample(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Sentences from a first-order Markov chain over `states`.
///
/// `transition[i][j]` is the (unnormalized) weight of moving from state `i`
/// to `j`; the first token is drawn uniformly.
pub fn markov_corpus(
    seed: u64,
    states: &[&str],
    transition: &[Vec<f64>],
    sentences: usize,
    len: usize,
) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..sentences)
        .map(|_| {
            let mut cur = rng.random_range(0..states.len());
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                out.push(states[cur].to_owned());
                cur = sample(&transition[cur], &mut rng);
            }
            out
        })
        .collect();
    Corpus::new(Level::Activity, s)
}

/// Density of a behaviour profile's transition graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Sparse,
    Medium,
    Dense,
}

/// A planted behaviour: a Markov chain over activity labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub id: usize,
    pub density: Density,
    pub activities: Vec<String>,
    /// Row-stochastic transition matrix over `activities`.
    pub transition: Vec<Vec<f64>>,
    /// Start distribution over `activities`.
    pub start: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Top,
    Bottom,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Participant {
    pub username: String,
    pub course: String,
    pub score: u32,
    pub profile: usize,
    pub role: Role,
}

/// Parameters of a synthetic telemetry log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub participants: usize,
    pub profiles: usize,
    /// Inclusive range of sessions per participant.
    pub sessions: (usize, usize),
    /// Inclusive range of events per session.
    pub session_len: (usize, usize),
    /// Size of the top and bottom score groups.
    pub group_size: usize,
    /// Course names and relative sizes.
    pub courses: Vec<(String, usize)>,
    pub secret: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            participants: 37,
            profiles: 19,
            sessions: (3, 5),
            session_len: (30, 70),
            group_size: 5,
            courses: vec![
                ("LEI".into(), 12),
                ("ETI".into(), 9),
                ("IGE".into(), 7),
                ("LCD".into(), 9),
            ],
            secret: "devprint-synthetic".into(),
            seed: 42,
        }
    }
}

/// One telemetry record, in the field order of the IDE plugin's output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthRecord {
    pub session: String,
    pub timestamp_begin: String,
    pub username: String,
    pub graduation: String,
    pub projectname: String,
    pub filename: String,
    pub extension: String,
    #[serde(rename = "categoryName")]
    pub category_name: String,
    #[serde(rename = "commandName")]
    pub command_name: String,
    pub platform: String,
    pub platform_branch: String,
    pub platform_version: String,
    pub java: String,
    pub os: String,
    pub os_arch: String,
    pub country: String,
    pub city: String,
    pub score: String,
    pub profile: String,
    pub hash: String,
}

impl SynthRecord {
    fn fields(&self) -> BTreeMap<String, String> {
        let v = serde_json::to_value(self).expect("record serializes");
        v.as_object()
            .expect("record is an object")
            .iter()
            .filter(|(k, _)| k.as_str() != "hash")
            .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_owned()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticLog {
    pub participants: Vec<Participant>,
    pub profiles: Vec<Profile>,
    pub records: Vec<SynthRecord>,
    /// Activity label of each record, as generated.
    #[serde(skip)]
    pub activities: Vec<String>,
}

impl SyntheticLog {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }
}

const IDE_POOL: [&str; 4] = ["Navigating", "Debugging", "Refactoring", SPURIOUS];
const VERDICTS: [&str; 6] = [
    "Accepted_Answer",
    "Wrong_Answer",
    "Compile_Time_Error",
    "Invalid_Submission",
    "Runtime_Error",
    "Time_Limit_Exceeded",
];

/// `(categoryName, commandNames)` emitted for an activity label.
fn commands(activity: &str) -> (&'static str, &'static [&'static str]) {
    match activity {
        "Editing" => (
            "Editor",
            &["EditorTyping", "EditorBackSpace", "EditorEnter", "$Paste", "$Undo", "CodeCompletion", "SaveAll"],
        ),
        "Navigating" => ("Navigation", &["GotoDeclaration", "Find", "EditorUp", "EditorDown", "RecentFiles"]),
        "Debugging" => ("Debugger", &["ToggleLineBreakpoint", "Debug", "StepOver", "StepInto", "Resume"]),
        "Refactoring" => ("Refactoring", &["RenameElement", "ExtractMethod", "IntroduceVariable"]),
        "Executing" => ("NavBarToolbar", &["Run", "Rerun", "Stop"]),
        SPURIOUS => ("Other", &["ShowSettings", "CheckForUpdate"]),
        "Accepted_Answer" => ("Mooshak", &["Accepted_Answer"]),
        "Wrong_Answer" => ("Mooshak", &["Wrong_Answer"]),
        "Compile_Time_Error" => ("Mooshak", &["Compile_Time_Error"]),
        "Invalid_Submission" => ("Mooshak", &["Invalid_Submission"]),
        "Runtime_Error" => ("Mooshak", &["Runtime_Error"]),
        "Time_Limit_Exceeded" => ("Mooshak", &["Time_Limit_Exceeded"]),
        other => panic!("no commands for activity {other}"),
    }
}

fn make_profile(id: usize, density: Density, rng: &mut ChaCha8Rng) -> Profile {
    let (extra, out_deg) = match density {
        Density::Sparse => (rng.random_range(2..=3), (1, 2)),
        Density::Medium => (rng.random_range(5..=7), (2, 4)),
        Density::Dense => (rng.random_range(8..=10), (5, 8)),
    };
    let mut pool: Vec<&str> = IDE_POOL.iter().chain(&VERDICTS).copied().collect();
    pool.shuffle(rng);
    if density == Density::Sparse {
        // sparse profiles stay away from debugging and refactoring
        pool.retain(|a| !["Debugging", "Refactoring", SPURIOUS].contains(a));
    }
    let mut acts: Vec<String> = vec!["Editing".into(), "Executing".into()];
    acts.extend(pool.into_iter().take(extra).map(str::to_owned));
    let n = acts.len();
    // a random cycle through every activity keeps the chain irreducible
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    order.insert(0, 0);
    let mut transition = vec![vec![0.0; n]; n];
    for (pos, &i) in order.iter().enumerate() {
        let next = order[(pos + 1) % n];
        transition[i][next] = 2.0 + rng.random::<f64>();
        let deg = rng.random_range(out_deg.0..=out_deg.1).min(n);
        let mut others: Vec<usize> = (0..n).filter(|&j| j != next).collect();
        others.shuffle(rng);
        for &j in others.iter().take(deg.saturating_sub(1)) {
            transition[i][j] = 0.5 + rng.random::<f64>();
        }
    }
    for row in &mut transition {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    let mut start = vec![0.0; n];
    start[0] = 1.0;
    if density == Density::Dense {
        start[1] = 0.5;
        start[n - 1] = 0.5;
    }
    let s: f64 = start.iter().sum();
    start.iter_mut().for_each(|x| *x /= s);
    Profile {
        id,
        density,
        activities: acts,
        transition,
        start,
    }
}

fn density_of(p: usize, profiles: usize) -> Density {
    match p {
        _ if profiles < 3 => Density::Medium,
        0..=2 => Density::Sparse,
        3..=5 => Density::Dense,
        _ => Density::Medium,
    }
}

fn hex_id(rng: &mut ChaCha8Rng) -> String {
    let b: [u8; 16] = rng.random();
    let h = hex::encode(b);
    format!("{}-{}-{}-{}-{}", &h[..8], &h[8..12], &h[12..16], &h[16..20], &h[20..])
}

/// Generates a signed telemetry log with planted behaviour profiles.
///
/// The `group_size` lowest scorers follow sparse profiles, the
/// `group_size` highest scorers dense ones, and everyone else the remaining
/// medium-density profiles, so process-model simplicity differs between the
/// score groups.
pub fn generate_log(spec: &SyntheticSpec) -> Result<SyntheticLog> {
    if spec.sessions.0 > spec.sessions.1 || spec.session_len.0 > spec.session_len.1 {
        return Err(Error::arg("empty session or length range"));
    }
    if spec.session_len.0 < 1 || spec.sessions.0 < 1 {
        return Err(Error::arg("sessions need at least one event"));
    }
    if spec.participants > 0 && spec.profiles == 0 {
        return Err(Error::arg("need at least one profile"));
    }
    if spec.courses.is_empty() || spec.courses.iter().all(|c| c.1 == 0) {
        return Err(Error::arg("need at least one course"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let profiles: Vec<Profile> = (0..spec.profiles)
        .map(|p| make_profile(p, density_of(p, spec.profiles), &mut rng))
        .collect();

    let n = spec.participants;
    let g = spec.group_size.min(n / 2);
    // rank 0 is the lowest score
    let role = |rank: usize| {
        if rank < g {
            Role::Bottom
        } else if rank >= n - g {
            Role::Top
        } else {
            Role::Other
        }
    };
    let pick = |rank: usize, r: Role| -> usize {
        let p = spec.profiles;
        if p < 7 {
            return rank % p;
        }
        match r {
            Role::Bottom => rank % 3,
            Role::Top => 3 + (rank - (n - g)) % 3,
            Role::Other => 6 + (rank - g) % (p - 6),
        }
    };
    let mut scores: Vec<u32> = (0..=600).collect();
    scores.shuffle(&mut rng);
    let mut scores: Vec<u32> = scores.into_iter().take(n).collect();
    scores.sort_unstable();
    let total_weight: usize = spec.courses.iter().map(|c| c.1).sum();
    let course_of = |i: usize| {
        let mut acc = 0;
        for (name, w) in &spec.courses {
            acc += w;
            if i * total_weight < acc * n {
                return name.clone();
            }
        }
        spec.courses.last().unwrap().0.clone()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut participants: Vec<Participant> = (0..n)
        .map(|i| {
            let rank = order[i];
            let r = role(rank);
            Participant {
                username: format!("{}", 80000 + 137 * i),
                course: course_of(i),
                score: scores[rank],
                profile: pick(rank, r),
                role: r,
            }
        })
        .collect();
    participants.sort_by(|a, b| a.username.cmp(&b.username));

    let base = parse_timestamp("2020-09-18T09:00:00.000Z").expect("valid base time");
    let mut records = Vec::new();
    let mut activities = Vec::new();
    for (pi, part) in participants.iter().enumerate() {
        let prof = &profiles[part.profile];
        let mut t = base + chrono::Duration::milliseconds(pi as i64 * 997);
        let sessions = rng.random_range(spec.sessions.0..=spec.sessions.1);
        for s in 0..sessions {
            let session = hex_id(&mut rng);
            let problem = 1 + (s % 6);
            let len = rng.random_range(spec.session_len.0..=spec.session_len.1);
            let mut state = sample(&prof.start, &mut rng);
            for _ in 0..len {
                let act = &prof.activities[state];
                let (category, cmds) = commands(act);
                let cmd = cmds[rng.random_range(0..cmds.len())];
                let mut rec = SynthRecord {
                    session: session.clone(),
                    timestamp_begin: format_timestamp(&t),
                    username: part.username.clone(),
                    graduation: part.course.clone(),
                    projectname: "PythaconResolution".into(),
                    filename: format!("P{problem}.py"),
                    extension: "py".into(),
                    category_name: category.into(),
                    command_name: cmd.into(),
                    platform: "JetBrains s.r.o. / PyCharmCore".into(),
                    platform_branch: "PyCharm".into(),
                    platform_version: "2020.2.1".into(),
                    java: "11.0.8+10-b944.31".into(),
                    os: "Mac OS X 10.15.6".into(),
                    os_arch: "x86_64".into(),
                    country: "Portugal".into(),
                    city: "Lisbon".into(),
                    score: part.score.to_string(),
                    profile: part.profile.to_string(),
                    hash: String::new(),
                };
                rec.hash = event_digest(&rec.fields(), spec.secret.as_bytes());
                records.push(rec);
                activities.push(act.clone());
                t += chrono::Duration::milliseconds(rng.random_range(800..20_000));
                state = sample(&prof.transition[state], &mut rng);
            }
            t += chrono::Duration::minutes(rng.random_range(5..40));
        }
    }
    Ok(SyntheticLog {
        participants,
        profiles,
        records,
        activities,
    })
}
