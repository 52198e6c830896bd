use rayon::prelude::*;
use serde::Serialize;

use super::{fit_lda, lda_heldout_entropy, DocTermMatrix, LdaConfig};
use crate::error::Result;
use crate::ngram::fold_splits;

/// Sweeps used to fold held-out documents into a fitted model.
pub const FOLD_IN_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdaEntropy {
    pub k: usize,
    pub ngram_order: usize,
    /// Held-out bits per term, one value per fold.
    pub folds: Vec<f64>,
    pub mean: f64,
}

/// k-fold held-out entropy of LDA for each topic count in `ks`.
///
/// The term space is that of `dtm`, built on the whole corpus, so every
/// held-out term has smoothed mass under `phi`.
pub fn kfold_lda_entropy(
    dtm: &DocTermMatrix,
    ks: &[usize],
    folds: usize,
    base: LdaConfig,
) -> Result<Vec<LdaEntropy>> {
    let splits = fold_splits(dtm.num_docs(), folds, base.seed)?;
    let jobs: Vec<(usize, usize)> = ks
        .iter()
        .flat_map(|&k| (0..splits.len()).map(move |f| (k, f)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(k, f)| {
            let split = &splits[f];
            let model = fit_lda(&dtm.subset(&split.train), LdaConfig { k, ..base })?;
            lda_heldout_entropy(&model, &dtm.subset(&split.test), FOLD_IN_SWEEPS, base.seed ^ f as u64)
        })
        .collect();
    let mut out = Vec::with_capacity(ks.len());
    let mut it = results.into_iter();
    for &k in ks {
        let folds: Vec<f64> = it.by_ref().take(splits.len()).collect::<Result<_>>()?;
        let mean = folds.iter().sum::<f64>() / folds.len() as f64;
        out.push(LdaEntropy {
            k,
            ngram_order: dtm.ngram_order,
            folds,
            mean,
        });
    }
    Ok(out)
}
