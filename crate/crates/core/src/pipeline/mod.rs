//! The batch pipeline behind the command-line tool: synthetic logs, ingest,
//! n-gram entropy, topic fingerprints, process quality and group statistics.
//!
//! Every command reads its inputs from the configured output directory (the
//! canonical log written by [`cmd_ingest`], the per-case quality table written
//! by [`cmd_process`]) and writes its artifacts there atomically. Data files
//! carry the run seed and a digest of the analysis configuration.

mod artifact;
mod commands;
mod config;
mod group;
pub mod svg;

pub use artifact::{num, stamped_json, write_atomic, Stamp, Table};
pub use commands::*;
pub use config::*;
pub use group::{quantile, CaseAttributes, GroupSpec, NamedGroup};

#[cfg(test)]
mod tests;
