//! LDA topic models over sessions as bags of activity n-grams, topic-count
//! selection, held-out entropy and per-participant fingerprints.

mod docs;
mod fingerprint;
mod heldout;
mod lda;
mod select;

pub use docs::{build_docs, DocTermMatrix, TERM_SEP};
pub use fingerprint::{argmax, extract_fingerprints, Fingerprint, FingerprintReport};
pub use heldout::{kfold_lda_entropy, LdaEntropy, FOLD_IN_SWEEPS};
pub use lda::{fit_lda, fold_in, lda_heldout_entropy, LdaConfig, LdaModel};
pub use select::{
    arun2010, cao2009, deveaud2014, griffiths2004, min_max, select_k, summarize, Metric,
    SelectionRow, TopicSelectionReport,
};

#[cfg(test)]
mod tests;
