//! Readers and writers for TREC topics, qrels and run files, and for query
//! variant datasets.
//!
//! Input may use CRLF line endings; output always uses LF.

mod qrels;
mod runs;
mod topics;
mod variants;

use std::path::Path;

use crate::error::{Error, Result};

pub use qrels::{format_qrels, parse_qrels, read_qrels, write_qrels};
pub use runs::{format_run, format_score, parse_run, read_run, write_run};
pub use topics::{format_topics, parse_topics, read_topics, write_topics, write_topics_jsonl};
pub use variants::{
    format_variants_jsonl, format_variants_tsv, parse_variants_jsonl, parse_variants_tsv, read_variants,
    write_variants_jsonl, write_variants_tsv,
};

/// Strict parsing rejects files that break the format's invariants; lenient
/// parsing repairs what it can and reports a warning instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
