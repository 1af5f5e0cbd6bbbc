//! `varfuse synth`: a synthetic collection plus a ready-to-run config.

use std::path::{Path, PathBuf};

use varfuse_core::synthfixture::{generate_collection, write_collection, SynthSpec};

use crate::error::Result;
use crate::layout::write_atomic;

/// Config for running the stub generator over a generated collection.
pub fn stub_config_text() -> &'static str {
    "corpus = \"corpus.jsonl\"\n\
topics = \"topics.txt\"\n\
qrels = \"qrels.txt\"\n\
output = \"out\"\n\
\n\
[generation]\n\
stub = true\n"
}

/// Writes the collection files and `experiment.toml` into `dir` and
/// returns the config path.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    let collection = generate_collection(spec)?;
    write_collection(&collection, dir)?;
    let config = dir.join("experiment.toml");
    write_atomic(&config, stub_config_text())?;
    Ok(config)
}
