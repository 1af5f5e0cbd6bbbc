//! Where each stage puts its artifacts under the output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;
use varfuse_core::querygen::StrategyKind;

use crate::error::Result;

pub const BM25_TAG: &str = "bm25";
pub const RM3_TAG: &str = "bm25-rm3";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index.bin")
    }

    pub fn variants_jsonl(&self, s: StrategyKind) -> PathBuf {
        self.root.join("variants").join(format!("{s}.jsonl"))
    }

    pub fn variants_tsv(&self, s: StrategyKind) -> PathBuf {
        self.root.join("variants").join(format!("{s}.tsv"))
    }

    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn baseline_run(&self, tag: &str) -> PathBuf {
        self.root.join("runs").join(format!("{tag}.run"))
    }

    /// Run of the `i`-th (1-based) variant of every topic.
    pub fn variant_run(&self, s: StrategyKind, i: usize) -> PathBuf {
        self.root
            .join("runs")
            .join("variants")
            .join(s.to_string())
            .join(format!("v{i:03}.run"))
    }

    pub fn fused_run(&self, tag: &str) -> PathBuf {
        self.root.join("runs").join("fused").join(format!("{tag}.run"))
    }

    pub fn report_table(&self) -> PathBuf {
        self.root.join("report").join("table.txt")
    }

    pub fn report_jsonl(&self) -> PathBuf {
        self.root.join("report").join("report.jsonl")
    }

    pub fn delta(&self, s: StrategyKind, m: usize) -> PathBuf {
        self.root.join("analysis").join(format!("delta-ndcg-{s}-m{m}.tsv"))
    }
}

pub fn variant_tag(s: StrategyKind, i: usize) -> String {
    format!("{s}-v{i:03}")
}

/// `<strategy>-rrf<k>-m<m>`, e.g. `P2-rrf60-m10`.
pub fn fused_tag(s: StrategyKind, k: f64, m: usize) -> String {
    format!("{s}-rrf{k}-m{m}")
}

/// Writes through a temporary file in the target directory so readers
/// never see a half-written artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |e| varfuse_core::Error::io(path, e);
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
