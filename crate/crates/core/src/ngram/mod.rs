//! Back-off n-gram language models over token sentences.
//!
//! Sentences are padded with `n − 1` leading [`BOS`] markers and, unless
//! disabled, one trailing [`EOS`]. The predicted event space is the training
//! vocabulary plus [`EOS`] and [`UNK`]; `BOS` is context only. Training tokens
//! seen fewer than `min_count` times are folded into `UNK`, and so are unknown
//! tokens at scoring time.
//!
//! Three estimators are available:
//!
//! * [`Smoothing::Mle`]: relative frequencies. Unseen events have probability
//!   zero and scoring them fails with [`Error::ZeroProbability`].
//! * [`Smoothing::AddK`]: additive smoothing at the highest order only.
//! * [`Smoothing::Katz`]: Katz back-off with Good-Turing discounts for counts up
//!   to a cut-off, backing off all the way to a uniform distribution. Every
//!   conditional distribution is strictly positive and sums to one.
//!
//! All log probabilities are base 2.

mod cv;
mod text;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::Corpus;

pub use cv::{fold_splits, kfold_cross_entropy, CorpusSplit, EntropyReport, FoldEntropy};
pub use text::{english_corpus, tokenize_english, AUSTEN_SAMPLE};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Smoothing {
    Mle,
    AddK { k: f64 },
    /// Counts up to `cutoff` are Good-Turing discounted.
    Katz { cutoff: usize },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Katz { cutoff: 5 }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothing::Mle => f.write_str("mle"),
            Smoothing::AddK { k } => write!(f, "add-{k}"),
            Smoothing::Katz { cutoff } => write!(f, "katz-gt{cutoff}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub order: usize,
    pub smoothing: Smoothing,
    /// Training tokens seen fewer times than this become [`UNK`].
    pub min_count: usize,
    /// Append [`EOS`] to every sentence.
    pub end_marker: bool,
}

impl NGramConfig {
    pub fn new(order: usize) -> Self {
        NGramConfig {
            order,
            smoothing: Smoothing::default(),
            min_count: 2,
            end_marker: true,
        }
    }

    pub fn smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn min_count(mut self, min_count: usize) -> Self {
        self.min_count = min_count;
        self
    }

    pub fn end_marker(mut self, end_marker: bool) -> Self {
        self.end_marker = end_marker;
        self
    }
}

type TokenId = u32;

/// Counts and estimates for one context.
#[derive(Debug, Clone, Default)]
struct ContextEntry {
    /// `(token, count, probability)`, sorted by token id.
    seen: Vec<(TokenId, u64, f64)>,
    /// Weight on the lower-order distribution for unseen tokens.
    backoff: f64,
}

impl ContextEntry {
    fn lookup(&self, w: TokenId) -> Option<f64> {
        self.seen
            .binary_search_by_key(&w, |&(t, _, _)| t)
            .ok()
            .map(|i| self.seen[i].2)
    }
}

/// A trained n-gram model; immutable once built.
#[derive(Debug, Clone)]
pub struct NGramModel {
    config: NGramConfig,
    /// Predicted tokens; `BOS` sits one past the end.
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    bos: TokenId,
    eos: Option<TokenId>,
    unk: TokenId,
    /// `contexts[m]` holds contexts of length `m` (i.e. order `m + 1`).
    contexts: Vec<HashMap<Vec<TokenId>, ContextEntry>>,
}

impl NGramModel {
    pub fn train(corpus: &Corpus, config: NGramConfig) -> Result<Self> {
        if config.order < 1 {
            return Err(Error::arg("n-gram order must be at least 1"));
        }
        if corpus.is_empty() {
            return Err(Error::Empty("cannot train on an empty corpus".into()));
        }
        if let Smoothing::AddK { k } = config.smoothing {
            if !(k > 0.0) {
                return Err(Error::arg("add-k smoothing needs k > 0"));
            }
        }

        let mut freq: HashMap<&str, usize> = HashMap::new();
        for t in corpus.sentences.iter().flatten() {
            *freq.entry(t.as_str()).or_default() += 1;
        }
        let mut kept: Vec<&str> = freq
            .iter()
            .filter(|&(t, &c)| c >= config.min_count && ![BOS, EOS, UNK].contains(t))
            .map(|(&t, _)| t)
            .collect();
        kept.sort_unstable();

        let mut tokens: Vec<String> = kept.iter().map(|t| t.to_string()).collect();
        let eos = config.end_marker.then(|| {
            tokens.push(EOS.to_owned());
            (tokens.len() - 1) as TokenId
        });
        tokens.push(UNK.to_owned());
        let unk = (tokens.len() - 1) as TokenId;
        let bos = tokens.len() as TokenId;
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();

        let mut model = NGramModel {
            config,
            tokens,
            ids,
            bos,
            eos,
            unk,
            contexts: vec![HashMap::new(); config.order],
        };

        let mut counts: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u64>>> =
            vec![HashMap::new(); config.order];
        for sentence in &corpus.sentences {
            let padded = model.pad(sentence);
            let start = config.order - 1;
            for i in start..padded.len() {
                let w = padded[i];
                for (m, table) in counts.iter_mut().enumerate() {
                    let ctx = padded[i - m..i].to_vec();
                    *table.entry(ctx).or_default().entry(w).or_default() += 1;
                }
            }
        }

        for (m, table) in counts.into_iter().enumerate() {
            let discounts = match config.smoothing {
                Smoothing::Katz { cutoff } => Some(KatzDiscounts::estimate(&table, cutoff)),
                _ => None,
            };
            let mut entries: Vec<(Vec<TokenId>, HashMap<TokenId, u64>)> =
                table.into_iter().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            for (ctx, followers) in entries {
                let entry = model.estimate(&ctx, followers, discounts.as_ref());
                model.contexts[m].insert(ctx, entry);
            }
        }
        Ok(model)
    }

    fn estimate(
        &self,
        ctx: &[TokenId],
        followers: HashMap<TokenId, u64>,
        discounts: Option<&KatzDiscounts>,
    ) -> ContextEntry {
        let mut seen: Vec<(TokenId, u64, f64)> =
            followers.into_iter().map(|(t, c)| (t, c, 0.0)).collect();
        seen.sort_unstable_by_key(|&(t, _, _)| t);
        let total: u64 = seen.iter().map(|&(_, c, _)| c).sum();
        let totalf = total as f64;
        let v = self.tokens.len() as f64;
        let mut entry = ContextEntry {
            seen,
            backoff: 0.0,
        };
        match self.config.smoothing {
            Smoothing::Mle => {
                for s in &mut entry.seen {
                    s.2 = s.1 as f64 / totalf;
                }
            }
            Smoothing::AddK { k } => {
                for s in &mut entry.seen {
                    s.2 = (s.1 as f64 + k) / (totalf + k * v);
                }
                entry.backoff = k / (totalf + k * v);
            }
            Smoothing::Katz { .. } => {
                let d = discounts.expect("katz discounts");
                for s in &mut entry.seen {
                    s.2 = d.factor(s.1) * s.1 as f64 / totalf;
                }
                // Lower-order mass of the tokens this context never saw.
                let unseen_low: f64 = (0..self.tokens.len() as TokenId)
                    .filter(|w| entry.lookup(*w).is_none())
                    .map(|w| self.katz_lower(ctx, w))
                    .sum();
                if entry.seen.len() == self.tokens.len() || unseen_low <= 0.0 {
                    let z: f64 = entry.seen.iter().map(|s| s.2).sum();
                    for s in &mut entry.seen {
                        s.2 /= z;
                    }
                } else {
                    let mut kept: f64 = entry.seen.iter().map(|s| s.2).sum();
                    if 1.0 - kept < 1e-12 {
                        // Every follower is above the Good-Turing cut-off, so
                        // no mass is left for back-off; discount absolutely.
                        for s in &mut entry.seen {
                            s.2 = (s.1 as f64 - d.absolute) / totalf;
                        }
                        kept = entry.seen.iter().map(|s| s.2).sum();
                    }
                    entry.backoff = (1.0 - kept) / unseen_low;
                }
            }
        }
        entry
    }

    /// Katz probability of `w` after `ctx` (at most `n − 1` tokens long).
    fn katz_prob(&self, ctx: &[TokenId], w: TokenId) -> f64 {
        match self.contexts[ctx.len()].get(ctx) {
            Some(e) => e
                .lookup(w)
                .unwrap_or_else(|| e.backoff * self.katz_lower(ctx, w)),
            None => self.katz_lower(ctx, w),
        }
    }

    /// The next lower order below `ctx`; uniform below unigrams.
    fn katz_lower(&self, ctx: &[TokenId], w: TokenId) -> f64 {
        if ctx.is_empty() {
            1.0 / self.tokens.len() as f64
        } else {
            self.katz_prob(&ctx[1..], w)
        }
    }

    fn pad(&self, sentence: &[String]) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(sentence.len() + self.config.order);
        out.extend(std::iter::repeat_n(self.bos, self.config.order - 1));
        out.extend(sentence.iter().map(|t| self.id_or_unk(t)));
        out.extend(self.eos);
        out
    }

    fn id_or_unk(&self, token: &str) -> TokenId {
        self.ids.get(token).copied().unwrap_or(self.unk)
    }

    fn name(&self, id: TokenId) -> &str {
        if id == self.bos {
            BOS
        } else {
            &self.tokens[id as usize]
        }
    }

    fn prob_ids(&self, ctx: &[TokenId], w: TokenId) -> f64 {
        let n = self.config.order;
        let ctx = &ctx[ctx.len().saturating_sub(n - 1)..];
        match self.config.smoothing {
            Smoothing::Katz { .. } => self.katz_prob(ctx, w),
            Smoothing::Mle => self.contexts[ctx.len()]
                .get(ctx)
                .and_then(|e| e.lookup(w))
                .unwrap_or(0.0),
            Smoothing::AddK { .. } => match self.contexts[ctx.len()].get(ctx) {
                Some(e) => e.lookup(w).unwrap_or(e.backoff),
                None => 1.0 / self.tokens.len() as f64,
            },
        }
    }

    /// `P(token | context)`. The context is truncated to its last `n − 1`
    /// tokens; unknown tokens are read as [`UNK`].
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let ctx: Vec<TokenId> = context
            .iter()
            .map(|&t| if t == BOS { self.bos } else { self.id_or_unk(t) })
            .collect();
        self.prob_ids(&ctx, self.id_or_unk(token))
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn smoothing(&self) -> Smoothing {
        self.config.smoothing
    }

    /// Predicted tokens: the kept vocabulary, [`EOS`] (if enabled) and [`UNK`].
    pub fn vocabulary(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_known(&self, token: &str) -> bool {
        self.ids.get(token).is_some_and(|&id| id != self.unk)
    }

    /// Every stored context, as token strings, for each order.
    pub fn contexts(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .contexts
            .iter()
            .flat_map(|t| t.keys())
            .map(|c| c.iter().map(|&id| self.name(id).to_owned()).collect())
            .collect();
        out.sort();
        out
    }

    /// Raw training count of `token` after `context` (exact context length).
    pub fn count(&self, context: &[&str], token: &str) -> u64 {
        if context.len() >= self.config.order {
            return 0;
        }
        let ctx: Vec<TokenId> = context
            .iter()
            .map(|&t| if t == BOS { self.bos } else { self.id_or_unk(t) })
            .collect();
        let w = self.id_or_unk(token);
        self.contexts[ctx.len()]
            .get(&ctx)
            .and_then(|e| e.seen.iter().find(|s| s.0 == w))
            .map_or(0, |s| s.1)
    }

    /// Scores one sentence: `Σ log₂ P(tᵢ | context)`, including the end
    /// marker when the model uses one.
    pub fn sequence_log_prob(&self, sentence: &[String]) -> Result<SentenceScore> {
        let padded = self.pad(sentence);
        let start = self.config.order - 1;
        let mut score = SentenceScore {
            log2_prob: 0.0,
            tokens: 0,
            oov: sentence.iter().filter(|t| !self.is_known(t)).count(),
        };
        for i in start..padded.len() {
            let ctx = &padded[i - start..i];
            let p = self.prob_ids(ctx, padded[i]);
            if p <= 0.0 {
                return Err(Error::ZeroProbability {
                    context: ctx.iter().map(|&t| self.name(t).to_owned()).collect(),
                    token: self.name(padded[i]).to_owned(),
                });
            }
            score.log2_prob += p.log2();
            score.tokens += 1;
        }
        Ok(score)
    }

    /// Per-token cross-entropy (bits) of `corpus` under this model.
    pub fn cross_entropy(&self, corpus: &Corpus) -> Result<CrossEntropy> {
        if corpus.is_empty() {
            return Err(Error::Empty("cannot score an empty corpus".into()));
        }
        let mut log2 = 0.0;
        let mut tokens = 0;
        let mut oov = 0;
        for s in &corpus.sentences {
            let sc = self.sequence_log_prob(s)?;
            log2 += sc.log2_prob;
            tokens += sc.tokens;
            oov += sc.oov;
        }
        if tokens == 0 {
            return Err(Error::Empty("corpus has no scorable tokens".into()));
        }
        Ok(CrossEntropy {
            bits: (-log2 / tokens as f64).max(0.0),
            tokens,
            oov,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceScore {
    pub log2_prob: f64,
    /// Scored positions, including the end marker.
    pub tokens: usize,
    pub oov: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub bits: f64,
    pub tokens: usize,
    pub oov: usize,
}

impl CrossEntropy {
    pub fn perplexity(&self) -> f64 {
        self.bits.exp2()
    }
}

/// Trains a model of order `n`; see [`NGramModel::train`].
pub fn train(corpus: &Corpus, n: usize, smoothing: Smoothing) -> Result<NGramModel> {
    NGramModel::train(corpus, NGramConfig::new(n).smoothing(smoothing))
}

pub fn sequence_log_prob(model: &NGramModel, sentence: &[String]) -> Result<f64> {
    model.sequence_log_prob(sentence).map(|s| s.log2_prob)
}

pub fn cross_entropy(model: &NGramModel, corpus: &Corpus) -> Result<f64> {
    model.cross_entropy(corpus).map(|h| h.bits)
}

/// Good-Turing discount factors for one n-gram order.
#[derive(Debug, Clone)]
struct KatzDiscounts {
    /// `factors[r - 1]` for `r` in `1..=cutoff`.
    factors: Vec<f64>,
    /// Fallback absolute discount.
    absolute: f64,
}

impl KatzDiscounts {
    fn estimate(table: &HashMap<Vec<TokenId>, HashMap<TokenId, u64>>, cutoff: usize) -> Self {
        let mut n_r = vec![0u64; cutoff + 2];
        for followers in table.values() {
            for &c in followers.values() {
                if (c as usize) < n_r.len() {
                    n_r[c as usize] += 1;
                }
            }
        }
        let n1 = n_r[1] as f64;
        let n2 = n_r.get(2).copied().unwrap_or(0) as f64;
        let absolute = if n1 > 0.0 && n2 > 0.0 {
            (n1 / (n1 + 2.0 * n2)).clamp(0.05, 0.95)
        } else {
            0.5
        };
        let common = if n1 > 0.0 {
            (cutoff + 1) as f64 * n_r[cutoff + 1] as f64 / n1
        } else {
            f64::NAN
        };
        let factors = (1..=cutoff)
            .map(|r| {
                let rf = r as f64;
                let (nr, nr1) = (n_r[r] as f64, n_r[r + 1] as f64);
                let gt = if nr > 0.0 && nr1 > 0.0 && common < 1.0 {
                    let r_star = (rf + 1.0) * nr1 / nr;
                    (r_star / rf - common) / (1.0 - common)
                } else {
                    f64::NAN
                };
                if gt > 0.0 && gt < 1.0 {
                    gt
                } else {
                    // Good-Turing unusable for this count; absolute discount.
                    (1.0 - absolute / rf).max(0.05)
                }
            })
            .collect();
        KatzDiscounts { factors, absolute }
    }

    fn factor(&self, count: u64) -> f64 {
        match count as usize {
            0 => 1.0,
            r if r <= self.factors.len() => self.factors[r - 1],
            _ => 1.0,
        }
    }
}
