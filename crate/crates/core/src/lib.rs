//! Developer fingerprinting from IDE event logs.
//!
//! The modules follow the pipeline: [`eventlog`] parses and recodes raw
//! records, [`ngram`] measures how regular sessions are, [`topic`] finds
//! behaviour fingerprints with LDA, [`process`] discovers and scores a
//! process model per case, and [`stats`] compares the scores between
//! groups. [`pipeline`] ties them into reproducible runs.

pub mod error;
pub mod eventlog;
pub mod ngram;
pub mod pipeline;
pub mod process;
pub mod stats;
pub mod synth;
pub mod topic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/event-logs.md")]
    mod event_logs {}
    #[doc = include_str!("../../../book/src/regularity.md")]
    mod regularity {}
    #[doc = include_str!("../../../book/src/fingerprints.md")]
    mod fingerprints {}
    #[doc = include_str!("../../../book/src/process-quality.md")]
    mod process_quality {}
    #[doc = include_str!("../../../book/src/group-statistics.md")]
    mod group_statistics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
