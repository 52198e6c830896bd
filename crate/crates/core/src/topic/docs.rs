use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eventlog::Corpus;

/// Separator between the tokens of an n-gram term.
pub const TERM_SEP: &str = "_";

/// Sparse document-term counts. Rows hold `(term, count)` sorted by term id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocTermMatrix {
    pub doc_ids: Vec<String>,
    pub terms: Vec<String>,
    pub rows: Vec<Vec<(u32, u32)>>,
    pub ngram_order: usize,
    /// Documents shorter than the n-gram order, left out.
    pub dropped: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

fn ngrams(tokens: &[String], w: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(w).map(|g| g.join(TERM_SEP))
}

impl DocTermMatrix {
    /// Builds counts of sliding `w`-grams, one row per labelled document.
    /// Terms are numbered in sorted order.
    pub fn build<S: AsRef<str>>(docs: &[(S, Vec<String>)], w: usize) -> Result<Self> {
        if w < 1 {
            return Err(Error::arg("n-gram order must be at least 1"));
        }
        if docs.is_empty() {
            return Err(Error::Empty("no documents".into()));
        }
        let terms: Vec<String> = docs
            .iter()
            .flat_map(|(_, d)| ngrams(d, w))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<String, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut dtm = DocTermMatrix {
            doc_ids: Vec::new(),
            terms,
            rows: Vec::new(),
            ngram_order: w,
            dropped: Vec::new(),
            index,
        };
        for (id, d) in docs {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for g in ngrams(d, w) {
                *counts.entry(dtm.index[&g]).or_default() += 1;
            }
            if counts.is_empty() {
                log::warn!("document {} is shorter than {w} tokens; dropped", id.as_ref());
                dtm.dropped.push(id.as_ref().to_owned());
                continue;
            }
            dtm.doc_ids.push(id.as_ref().to_owned());
            dtm.rows.push(counts.into_iter().collect());
        }
        if dtm.rows.is_empty() {
            return Err(Error::Empty(format!(
                "every document is shorter than the n-gram order {w}"
            )));
        }
        Ok(dtm)
    }

    pub fn num_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn doc_len(&self, d: usize) -> u64 {
        self.rows[d].iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn num_tokens(&self) -> u64 {
        (0..self.num_docs()).map(|d| self.doc_len(d)).sum()
    }

    /// Count of `term` in document `d`.
    pub fn count(&self, d: usize, term: &str) -> u32 {
        self.term_id(term)
            .and_then(|t| {
                self.rows[d]
                    .binary_search_by_key(&t, |&(id, _)| id)
                    .ok()
                    .map(|i| self.rows[d][i].1)
            })
            .unwrap_or(0)
    }

    /// The given rows, over the same term space.
    pub fn subset(&self, docs: &[usize]) -> DocTermMatrix {
        DocTermMatrix {
            doc_ids: docs.iter().map(|&d| self.doc_ids[d].clone()).collect(),
            terms: self.terms.clone(),
            rows: docs.iter().map(|&d| self.rows[d].clone()).collect(),
            ngram_order: self.ngram_order,
            dropped: Vec::new(),
            index: self.index.clone(),
        }
    }
}

/// Documents of a corpus, labelled by sentence index.
pub fn build_docs(corpus: &Corpus, w: usize) -> Result<DocTermMatrix> {
    let docs: Vec<(String, Vec<String>)> = corpus
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (i.to_string(), s.clone()))
        .collect();
    DocTermMatrix::build(&docs, w)
}
