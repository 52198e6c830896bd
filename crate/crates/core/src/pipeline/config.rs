//! Run configuration, read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::group::GroupSpec;
use crate::error::{Error, Result};
use crate::eventlog::Level;
use crate::ngram::Smoothing;
use crate::synth::SyntheticSpec;
use crate::topic::Metric;

/// Environment variable that overrides `out_dir`.
pub const OUT_DIR_ENV: &str = "DEVPRINT_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    pub entropy: EntropyConfig,
    pub topics: TopicConfig,
    pub process: ProcessConfig,
    pub stats: StatsConfig,
    pub synth: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("devprint-out"),
            input: InputConfig::default(),
            entropy: EntropyConfig::default(),
            topics: TopicConfig::default(),
            process: ProcessConfig::default(),
            stats: StatsConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub paths: Vec<PathBuf>,
    /// Attribute that identifies a case (one process model, one fingerprint).
    pub case_key: String,
    /// Attribute that identifies a development session inside a case.
    pub session_key: String,
    /// CSV activity map; the built-in map when absent.
    pub activity_map: Option<PathBuf>,
    /// Shared secret for tamper checks; skipped when absent.
    pub secret: Option<String>,
    pub dedupe: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            paths: Vec::new(),
            case_key: "username".into(),
            session_key: "session".into(),
            activity_map: None,
            secret: None,
            dedupe: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub levels: Vec<Level>,
    pub orders: Vec<usize>,
    pub folds: usize,
    pub smoothing: Smoothing,
    pub min_count: usize,
    /// Plain-text reference corpus scored at the same orders.
    pub reference_text: Option<PathBuf>,
    /// Score the bundled English sample when no reference text is given.
    pub builtin_reference: bool,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            levels: vec![Level::Activity, Level::Category, Level::Command],
            orders: (1..=6).collect(),
            folds: 5,
            smoothing: Smoothing::default(),
            min_count: 2,
            reference_text: None,
            builtin_reference: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentUnit {
    /// One document per case, sessions concatenated.
    Case,
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub k_min: usize,
    /// Capped at the number of documents.
    pub k_max: usize,
    pub orders: Vec<usize>,
    pub metrics: Vec<Metric>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub top_n: usize,
    pub documents: DocumentUnit,
    /// n-gram order whose chosen model yields the fingerprints.
    pub fingerprint_order: usize,
    /// Also compute k-fold held-out entropy over the k range.
    pub heldout: bool,
    pub folds: usize,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            k_min: 2,
            k_max: 20,
            orders: vec![1, 2, 3],
            metrics: Metric::ALL.to_vec(),
            alpha: None,
            beta: 0.1,
            iterations: 2000,
            burn_in: 500,
            top_n: 8,
            documents: DocumentUnit::Case,
            fingerprint_order: 1,
            heldout: true,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    /// Directly-follows edges seen fewer times are dropped.
    pub min_edge_freq: u64,
    /// Attribute for pooled per-group models, e.g. `graduation`.
    pub group_by: Option<String>,
    pub export_dot: bool,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        ProcessConfig {
            min_edge_freq: 1,
            group_by: Some("graduation".into()),
            export_dot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub groups: GroupSpec,
    /// Quality columns compared across groups.
    pub metrics: Vec<String>,
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            groups: GroupSpec::default(),
            metrics: QUALITY_COLUMNS.iter().map(|s| s.to_string()).collect(),
            alpha: crate::stats::ALPHA,
        }
    }
}

pub const QUALITY_COLUMNS: [&str; 5] = ["fitness", "precision", "generalization", "simplicity", "average"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::arg(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::arg(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `DEVPRINT_OUT` when set.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            self.out_dir = PathBuf::from(dir);
        }
        self
    }

    /// Hex SHA-256 over the analysis parameters.
    ///
    /// Paths, the output directory and the secret are left out, so moving
    /// files around does not change it; the activity map's content is in.
    pub fn digest(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.input.paths.clear();
        c.input.secret = None;
        c.entropy.reference_text = None;
        let map = match &self.input.activity_map {
            Some(p) => hex::encode(Sha256::digest(std::fs::read(p)?)),
            None => "builtin".into(),
        };
        c.input.activity_map = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&c)?);
        h.update(b"\0map=");
        h.update(map.as_bytes());
        if let Some(p) = &self.entropy.reference_text {
            h.update(b"\0ref=");
            h.update(Sha256::digest(std::fs::read(p)?));
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topics;
        if t.k_min < 2 || t.k_min > t.k_max {
            return Err(Error::arg(format!("bad topic range {}..={}", t.k_min, t.k_max)));
        }
        if t.burn_in >= t.iterations {
            return Err(Error::arg("burn_in must be below iterations"));
        }
        if t.orders.is_empty() || t.orders.contains(&0) {
            return Err(Error::arg("topic n-gram orders must be positive"));
        }
        if !t.orders.contains(&t.fingerprint_order) {
            return Err(Error::arg("fingerprint_order must be one of the topic orders"));
        }
        if self.entropy.orders.is_empty() || self.entropy.orders.contains(&0) {
            return Err(Error::arg("entropy orders must be positive"));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::arg("alpha must lie in (0, 1)"));
        }
        for m in &self.stats.metrics {
            if !QUALITY_COLUMNS.contains(&m.as_str()) {
                return Err(Error::arg(format!("unknown quality metric `{m}`")));
            }
        }
        self.stats.groups.validate()
    }
}
