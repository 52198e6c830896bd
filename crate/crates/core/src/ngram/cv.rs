use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{NGramConfig, NGramModel, Smoothing};
use crate::error::{Error, Result};
use crate::eventlog::Corpus;

/// One train/test partition of a corpus, by sentence index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSplit {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffles sentence indices with `seed` and cuts them into `folds`
/// contiguous blocks whose sizes differ by at most one.
pub fn fold_splits(len: usize, folds: usize, seed: u64) -> Result<Vec<CorpusSplit>> {
    if folds < 2 || folds > len {
        return Err(Error::arg(format!(
            "need 2 <= folds <= corpus size, got {folds} folds for {len} sentences"
        )));
    }
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds)
        .map(|f| {
            let (lo, hi) = (f * len / folds, (f + 1) * len / folds);
            let mut test = perm[lo..hi].to_vec();
            let mut train: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
            test.sort_unstable();
            train.sort_unstable();
            CorpusSplit {
                fold: f,
                train,
                test,
                seed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldEntropy {
    pub fold: usize,
    pub entropy_bits: f64,
    pub perplexity: f64,
    pub tokens: usize,
    pub oov: usize,
}

impl FoldEntropy {
    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov as f64 / self.tokens as f64
        }
    }
}

/// Held-out entropy of one model order across all folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub n: usize,
    pub smoothing: String,
    pub folds: Vec<FoldEntropy>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
    /// `2^mean`.
    pub perplexity: f64,
    pub tokens: usize,
    pub oov: usize,
}

impl EntropyReport {
    fn from_folds(n: usize, smoothing: Smoothing, folds: Vec<FoldEntropy>) -> Self {
        let k = folds.len() as f64;
        let mean = folds.iter().map(|f| f.entropy_bits).sum::<f64>() / k;
        let var = if folds.len() > 1 {
            folds
                .iter()
                .map(|f| (f.entropy_bits - mean).powi(2))
                .sum::<f64>()
                / (k - 1.0)
        } else {
            0.0
        };
        EntropyReport {
            n,
            smoothing: smoothing.to_string(),
            tokens: folds.iter().map(|f| f.tokens).sum(),
            oov: folds.iter().map(|f| f.oov).sum(),
            folds,
            mean,
            std: var.sqrt(),
            perplexity: mean.exp2(),
        }
    }

    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov as f64 / self.tokens as f64
        }
    }
}

/// k-fold cross-validated entropy for each order in `orders`.
///
/// Every order sees the same seeded partition. `base` supplies smoothing,
/// `min_count` and end-marker settings; its order is ignored.
pub fn kfold_cross_entropy(
    corpus: &Corpus,
    orders: &[usize],
    folds: usize,
    seed: u64,
    base: NGramConfig,
) -> Result<Vec<EntropyReport>> {
    let splits = fold_splits(corpus.len(), folds, seed)?;
    if let Some(&bad) = orders.iter().find(|&&n| n < 1) {
        return Err(Error::arg(format!("invalid n-gram order {bad}")));
    }
    let jobs: Vec<(usize, &CorpusSplit)> = orders
        .iter()
        .flat_map(|&n| splits.iter().map(move |s| (n, s)))
        .collect();
    let results: Vec<Result<(usize, FoldEntropy)>> = jobs
        .par_iter()
        .map(|&(n, split)| {
            let config = NGramConfig { order: n, ..base };
            let model = NGramModel::train(&corpus.subset(&split.train), config)?;
            let h = model.cross_entropy(&corpus.subset(&split.test))?;
            Ok((
                n,
                FoldEntropy {
                    fold: split.fold,
                    entropy_bits: h.bits,
                    perplexity: h.perplexity(),
                    tokens: h.tokens,
                    oov: h.oov,
                },
            ))
        })
        .collect();
    let mut per_order: Vec<Vec<FoldEntropy>> = vec![Vec::new(); orders.len()];
    for (i, r) in results.into_iter().enumerate() {
        let (_, fe) = r?;
        per_order[i / splits.len()].push(fe);
    }
    Ok(orders
        .iter()
        .zip(per_order)
        .map(|(&n, folds)| EntropyReport::from_folds(n, base.smoothing, folds))
        .collect())
}
