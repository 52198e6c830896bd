//! Metrics for choosing the number of topics.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_lda, DocTermMatrix, LdaConfig, LdaModel};
use crate::error::{Error, Result};

const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Griffiths2004,
    #[serde(rename = "cao2009")]
    CaoJuan2009,
    Arun2010,
    Deveaud2014,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Griffiths2004,
        Metric::CaoJuan2009,
        Metric::Arun2010,
        Metric::Deveaud2014,
    ];

    pub fn minimize(self) -> bool {
        matches!(self, Metric::CaoJuan2009 | Metric::Arun2010)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Griffiths2004 => "griffiths2004",
            Metric::CaoJuan2009 => "cao2009",
            Metric::Arun2010 => "arun2010",
            Metric::Deveaud2014 => "deveaud2014",
        }
    }

    pub fn value(self, model: &LdaModel) -> f64 {
        match self {
            Metric::Griffiths2004 => griffiths2004(&model.log_likelihoods),
            Metric::CaoJuan2009 => cao2009(&model.phi),
            Metric::Arun2010 => arun2010(&model.phi, &model.theta, &model.doc_lengths),
            Metric::Deveaud2014 => deveaud2014(&model.phi),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown topic metric {s:?}")))
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Harmonic-mean estimate of `log P(w | k)` from per-sample log-likelihoods.
pub fn griffiths2004(log_likelihoods: &[f64]) -> f64 {
    if log_likelihoods.is_empty() {
        return f64::NAN;
    }
    let n = log_likelihoods.len() as f64;
    n.ln() - log_sum_exp(log_likelihoods.iter().map(|&l| -l))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn mean_over_pairs(rows: &[Vec<f64>], f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let k = rows.len();
    if k < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            sum += f(&rows[i], &rows[j]);
        }
    }
    sum / (k * (k - 1) / 2) as f64
}

/// Mean pairwise cosine similarity between topic-term rows.
pub fn cao2009(phi: &[Vec<f64>]) -> f64 {
    mean_over_pairs(phi, cosine)
}

fn normalized_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| (x / s).max(FLOOR)).collect()
}

/// Symmetric KL divergence between the normalized singular values of `phi`
/// and the normalized, length-weighted topic mass `lengths · theta`, both
/// sorted in descending order.
pub fn arun2010(phi: &[Vec<f64>], theta: &[Vec<f64>], lengths: &[u64]) -> f64 {
    let k = phi.len();
    let v = phi.first().map_or(0, Vec::len);
    let m = DMatrix::from_fn(k, v, |i, j| phi[i][j]);
    let sv: Vec<f64> = m.singular_values().iter().copied().collect();
    let mut mass = vec![0.0; k];
    for (row, &len) in theta.iter().zip(lengths) {
        for (t, x) in row.iter().enumerate() {
            mass[t] += len as f64 * x;
        }
    }
    let (c1, c2) = (normalized_desc(sv), normalized_desc(mass));
    c1.iter()
        .zip(&c2)
        .map(|(&p, &q)| p * (p / q).ln() + q * (q / p).ln())
        .sum()
}

fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    js.max(0.0)
}

/// Mean pairwise Jensen–Shannon divergence (bits) between topic-term rows.
pub fn deveaud2014(phi: &[Vec<f64>]) -> f64 {
    mean_over_pairs(phi, jensen_shannon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub k: usize,
    pub ngram_order: usize,
    pub metric: Metric,
    pub raw: f64,
    /// Min-max scaled over the scan; 0.5 when the metric is constant.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicSelectionReport {
    pub ngram_order: usize,
    pub ks: Vec<usize>,
    pub rows: Vec<SelectionRow>,
    pub chosen_k: usize,
}

impl TopicSelectionReport {
    pub fn raw(&self, metric: Metric, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.k == k)
            .map(|r| r.raw)
    }

    /// The scanned `k` with the best raw value of `metric`.
    pub fn best_k(&self, metric: Metric) -> Option<usize> {
        let rows = self.rows.iter().filter(|r| r.metric == metric && r.raw.is_finite());
        let best = if metric.minimize() {
            rows.min_by(|a, b| a.raw.total_cmp(&b.raw))
        } else {
            rows.max_by(|a, b| a.raw.total_cmp(&b.raw))
        };
        best.map(|r| r.k)
    }
}

/// Min-max scaling; a constant series maps to 0.5.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
        .collect()
}

/// Rows for already-computed metric values, plus the chosen `k`.
///
/// The chosen `k` is the largest one at which some metric is within 5% of
/// its best value over the scan. If no metric varies, the `k` with the best
/// mean normalized score wins.
pub fn summarize(ngram_order: usize, ks: &[usize], values: &[(Metric, Vec<f64>)]) -> TopicSelectionReport {
    let mut rows = Vec::new();
    let mut hits = Vec::new();
    let mut score = vec![0.0; ks.len()];
    for (metric, raw) in values {
        let norm = min_max(raw);
        for (i, (&k, (&r, &n))) in ks.iter().zip(raw.iter().zip(&norm)).enumerate() {
            rows.push(SelectionRow {
                k,
                ngram_order,
                metric: *metric,
                raw: r,
                normalized: n,
            });
            let goodness = if metric.minimize() { 1.0 - n } else { n };
            score[i] += goodness;
            let varies = norm.iter().any(|&x| x != 0.5);
            if varies && goodness >= 0.95 {
                hits.push(k);
            }
        }
    }
    let chosen_k = hits.into_iter().max().unwrap_or_else(|| {
        let best = (0..ks.len())
            .max_by(|&a, &b| score[a].total_cmp(&score[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        ks[best]
    });
    TopicSelectionReport {
        ngram_order,
        ks: ks.to_vec(),
        rows,
        chosen_k,
    }
}

/// Fits one model per `k` (all with `base.seed`) and scores each with
/// `metrics`.
pub fn select_k(
    dtm: &DocTermMatrix,
    ks: &[usize],
    metrics: &[Metric],
    base: LdaConfig,
) -> Result<TopicSelectionReport> {
    if ks.is_empty() {
        return Err(Error::arg("empty topic-count range"));
    }
    if metrics.is_empty() {
        return Err(Error::arg("no topic metrics selected"));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k > dtm.num_docs()) {
        return Err(Error::arg(format!(
            "k = {bad} outside [2, {}] documents",
            dtm.num_docs()
        )));
    }
    let models: Vec<Result<LdaModel>> = ks
        .par_iter()
        .map(|&k| fit_lda(dtm, LdaConfig { k, ..base }))
        .collect();
    let models: Vec<LdaModel> = models.into_iter().collect::<Result<_>>()?;
    let values: Vec<(Metric, Vec<f64>)> = metrics
        .iter()
        .map(|&m| (m, models.iter().map(|model| m.value(model)).collect()))
        .collect();
    Ok(summarize(dtm.ngram_order, ks, &values))
}
