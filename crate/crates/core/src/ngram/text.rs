use crate::eventlog::{Corpus, Level};

/// Opening chapter of *Pride and Prejudice* (public domain), bundled as a
/// plain-English reference corpus.
pub const AUSTEN_SAMPLE: &str = include_str!("../../data/austen_pride_ch1.txt");

/// Lowercases, strips punctuation (apostrophes and hyphens inside words are
/// kept) and splits on whitespace.
pub fn tokenize_english(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|w| {
            let cleaned: String = w
                .to_lowercase()
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '-')
                .collect();
            let trimmed = cleaned.trim_matches(|c| c == '\'' || c == '-');
            (!trimmed.is_empty()).then(|| trimmed.to_owned())
        })
        .collect()
}

/// Splits plain text into sentences on `.`, `!`, `?` and blank lines, then
/// tokenizes each with [`tokenize_english`]. Empty sentences are dropped.
pub fn english_corpus(text: &str) -> Corpus {
    let mut sentences = Vec::new();
    for paragraph in text.split("\n\n") {
        for raw in paragraph.split(['.', '!', '?']) {
            let toks = tokenize_english(raw);
            if !toks.is_empty() {
                sentences.push(toks);
            }
        }
    }
    Corpus::new(Level::Command, sentences)
}
