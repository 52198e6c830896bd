use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::DocTermMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: None,
            beta: 0.1,
            iterations: 2000,
            burn_in: 500,
            seed: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn iterations(mut self, iterations: usize, burn_in: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self
    }

    pub fn alpha_value(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::arg("LDA needs k >= 2"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::arg("iterations must exceed burn-in"));
        }
        if !(self.alpha_value() > 0.0) || !(self.beta > 0.0) {
            return Err(Error::arg("LDA hyperparameters must be positive"));
        }
        Ok(())
    }
}

/// A fitted topic model. `phi` is `k × terms`, `theta` is `docs × k`; both
/// are posterior means averaged over the post-burn-in sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub terms: Vec<String>,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u64>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    /// `log P(w | z)` after each post-burn-in sweep.
    pub log_likelihoods: Vec<f64>,
}

/// Collapsed Gibbs sampler state.
struct Sampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    doc: Vec<u32>,
    word: Vec<u32>,
    z: Vec<u32>,
    n_dk: Vec<u32>,
    /// Word-major: `n_wk[w * k + t]`.
    n_wk: Vec<u32>,
    n_k: Vec<u32>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
}

impl Sampler {
    fn new(dtm: &DocTermMatrix, k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let v = dtm.num_terms();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut doc, mut word) = (Vec::new(), Vec::new());
        for (d, row) in dtm.rows.iter().enumerate() {
            for &(w, c) in row {
                for _ in 0..c {
                    doc.push(d as u32);
                    word.push(w);
                }
            }
        }
        let mut s = Sampler {
            k,
            v,
            alpha,
            beta,
            z: Vec::with_capacity(doc.len()),
            n_dk: vec![0; dtm.num_docs() * k],
            n_wk: vec![0; v * k],
            n_k: vec![0; k],
            doc,
            word,
            probs: vec![0.0; k],
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for i in 0..s.doc.len() {
            let t = rng.random_range(0..k) as u32;
            s.z.push(t);
            s.add(i, t);
        }
        s.rng = rng;
        s
    }

    fn add(&mut self, i: usize, t: u32) {
        let (d, w, t) = (self.doc[i] as usize, self.word[i] as usize, t as usize);
        self.n_dk[d * self.k + t] += 1;
        self.n_wk[w * self.k + t] += 1;
        self.n_k[t] += 1;
    }

    fn remove(&mut self, i: usize, t: u32) {
        let (d, w, t) = (self.doc[i] as usize, self.word[i] as usize, t as usize);
        self.n_dk[d * self.k + t] -= 1;
        self.n_wk[w * self.k + t] -= 1;
        self.n_k[t] -= 1;
    }

    fn sweep(&mut self) {
        let vbeta = self.v as f64 * self.beta;
        for i in 0..self.z.len() {
            let old = self.z[i];
            self.remove(i, old);
            let (d, w) = (self.doc[i] as usize, self.word[i] as usize);
            let mut total = 0.0;
            for t in 0..self.k {
                let p = (self.n_dk[d * self.k + t] as f64 + self.alpha)
                    * (self.n_wk[w * self.k + t] as f64 + self.beta)
                    / (self.n_k[t] as f64 + vbeta);
                total += p;
                self.probs[t] = total;
            }
            let u = self.rng.random::<f64>() * total;
            let new = self.probs.iter().position(|&c| u < c).unwrap_or(self.k - 1) as u32;
            self.z[i] = new;
            self.add(i, new);
        }
    }

    /// `log P(w | z)` with `phi` integrated out.
    fn log_likelihood(&self, lg: &LnGammaTable) -> f64 {
        let vbeta = self.v as f64 * self.beta;
        let mut ll = self.k as f64 * ln_gamma(vbeta);
        for &n in &self.n_k {
            ll -= ln_gamma(n as f64 + vbeta);
        }
        for &n in &self.n_wk {
            if n > 0 {
                ll += lg.get(n);
            }
        }
        ll
    }
}

/// `lnΓ(n + β) − lnΓ(β)` for integer `n`.
struct LnGammaTable {
    beta: f64,
    table: Vec<f64>,
}

impl LnGammaTable {
    fn new(beta: f64, max: usize) -> Self {
        let base = ln_gamma(beta);
        LnGammaTable {
            beta,
            table: (0..=max).map(|n| ln_gamma(n as f64 + beta) - base).collect(),
        }
    }

    fn get(&self, n: u32) -> f64 {
        match self.table.get(n as usize) {
            Some(&v) => v,
            None => ln_gamma(n as f64 + self.beta) - ln_gamma(self.beta),
        }
    }
}

/// Fits LDA by collapsed Gibbs sampling. Deterministic for a given seed.
pub fn fit_lda(dtm: &DocTermMatrix, config: LdaConfig) -> Result<LdaModel> {
    config.validate()?;
    let (k, v, nd) = (config.k, dtm.num_terms(), dtm.num_docs());
    if k > v {
        log::warn!("k = {k} exceeds the {v} distinct terms");
    }
    let alpha = config.alpha_value();
    let beta = config.beta;
    let mut s = Sampler::new(dtm, k, alpha, beta, config.seed);
    let lg = LnGammaTable::new(beta, 4096);
    let mut phi = vec![vec![0.0; v]; k];
    let mut theta = vec![vec![0.0; k]; nd];
    let mut lls = Vec::with_capacity(config.iterations - config.burn_in);
    let doc_lengths: Vec<u64> = (0..nd).map(|d| dtm.doc_len(d)).collect();
    let vbeta = v as f64 * beta;
    let kalpha = k as f64 * alpha;
    for it in 0..config.iterations {
        s.sweep();
        if it < config.burn_in {
            continue;
        }
        for (t, row) in phi.iter_mut().enumerate() {
            let denom = s.n_k[t] as f64 + vbeta;
            for (w, x) in row.iter_mut().enumerate() {
                *x += (s.n_wk[w * k + t] as f64 + beta) / denom;
            }
        }
        for (d, row) in theta.iter_mut().enumerate() {
            let denom = doc_lengths[d] as f64 + kalpha;
            for (t, x) in row.iter_mut().enumerate() {
                *x += (s.n_dk[d * k + t] as f64 + alpha) / denom;
            }
        }
        lls.push(s.log_likelihood(&lg));
    }
    for row in phi.iter_mut().chain(theta.iter_mut()) {
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= z);
    }
    Ok(LdaModel {
        k,
        alpha,
        beta,
        iterations: config.iterations,
        burn_in: config.burn_in,
        seed: config.seed,
        terms: dtm.terms.clone(),
        doc_ids: dtm.doc_ids.clone(),
        doc_lengths,
        phi,
        theta,
        log_likelihoods: lls,
    })
}

impl LdaModel {
    /// Per-term entropy (bits) of the training documents under the fitted
    /// `theta` and `phi`.
    pub fn training_entropy(&self, dtm: &DocTermMatrix) -> f64 {
        entropy_bits(&self.phi, &self.theta, dtm)
    }

    /// Highest-probability terms of topic `t`, descending; ties by term.
    pub fn top_terms(&self, t: usize, n: usize) -> Vec<(String, f64)> {
        let mut idx: Vec<usize> = (0..self.terms.len()).collect();
        idx.sort_by(|&a, &b| self.phi[t][b].total_cmp(&self.phi[t][a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|w| (self.terms[w].clone(), self.phi[t][w]))
            .collect()
    }
}

pub(crate) fn entropy_bits(phi: &[Vec<f64>], theta: &[Vec<f64>], dtm: &DocTermMatrix) -> f64 {
    let mut total = 0.0;
    let mut n = 0u64;
    for (d, row) in dtm.rows.iter().enumerate() {
        for &(w, c) in row {
            let p: f64 = theta[d]
                .iter()
                .zip(phi)
                .map(|(th, ph)| th * ph[w as usize])
                .sum();
            total += c as f64 * p.log2();
            n += c as u64;
        }
    }
    -total / n as f64
}

/// Fold-in estimate of `theta` for new documents with `phi` frozen.
///
/// Runs `sweeps` Gibbs sweeps per document and averages the second half.
/// The documents must use the model's term space.
pub fn fold_in(model: &LdaModel, dtm: &DocTermMatrix, sweeps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dtm.terms != model.terms {
        return Err(Error::arg("documents do not share the model's term space"));
    }
    if sweeps < 2 {
        return Err(Error::arg("fold-in needs at least two sweeps"));
    }
    let k = model.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = sweeps / 2;
    let mut probs = vec![0.0; k];
    let mut out = Vec::with_capacity(dtm.num_docs());
    for row in &dtm.rows {
        let words: Vec<usize> = row
            .iter()
            .flat_map(|&(w, c)| std::iter::repeat_n(w as usize, c as usize))
            .collect();
        let mut n_k = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                n_k[t] += 1;
                t
            })
            .collect();
        let mut acc = vec![0.0; k];
        let denom = words.len() as f64 + k as f64 * model.alpha;
        for sweep in 0..sweeps {
            for (i, &w) in words.iter().enumerate() {
                n_k[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (n_k[t] as f64 + model.alpha) * model.phi[t][w];
                    probs[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let t = probs.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[i] = t;
                n_k[t] += 1;
            }
            if sweep >= burn {
                for t in 0..k {
                    acc[t] += (n_k[t] as f64 + model.alpha) / denom;
                }
            }
        }
        let s: f64 = acc.iter().sum();
        out.push(acc.into_iter().map(|x| x / s).collect());
    }
    Ok(out)
}

/// Per-term cross-entropy (bits) of `test` documents under `model`, with
/// document mixtures re-estimated by [`fold_in`].
pub fn lda_heldout_entropy(model: &LdaModel, test: &DocTermMatrix, sweeps: usize, seed: u64) -> Result<f64> {
    let theta = fold_in(model, test, sweeps, seed)?;
    Ok(entropy_bits(&model.phi, &theta, test))
}
