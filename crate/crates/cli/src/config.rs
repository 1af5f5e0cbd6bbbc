//! Experiment configuration.
//!
//! A single TOML document. Relative paths are resolved against the
//! directory holding the file. Everything except the three input paths has
//! a default:
//!
//! ```toml
//! corpus = "corpus.jsonl"
//! topics = "topics.txt"
//! qrels = "qrels.txt"
//! output = "out"
//! workers = 0            # 0 = one per core
//!
//! [analyzer]
//! lowercase = true
//! stemmer = "porter"     # or "none"
//! stopwords = "bundled"  # "none" or a path to a word list
//!
//! [bm25]
//! k1 = 1.2
//! b = 0.75
//! depth = 1000
//!
//! [rm3]
//! fb_docs = 10
//! fb_terms = 10
//! orig_weight = 0.5
//!
//! [rrf]
//! k = 60.0
//! cutoff = 1000
//!
//! [generation]
//! strategies = ["P1", "P2", "P3"]
//! num_queries = 100
//! m_values = [3, 5, 10, 100]
//! temperature = 0.0
//! seed = 42
//! stub = false
//! layout = "single_user" # or "system_role"
//! # examples = "p3_examples.jsonl"
//!
//! [client]
//! endpoint = "https://api.openai.com/v1"
//! model = "gpt-4o-2024-05-13"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [evaluation]
//! alpha = 0.05
//! alternative = "two-sided"
//! delta_ndcg_cutoff = 1000
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use varfuse_core::analyzer::{parse_stopwords, AnalyzerConfig, Stemmer, DEFAULT_STOPWORDS};
use varfuse_core::fusion::RrfParams;
use varfuse_core::metrics::Alternative;
use varfuse_core::querygen::{ClientConfig, Decoding, PromptLayout, PromptOptions, StrategyKind};
use varfuse_core::retrieval::{Bm25Params, Rm3Params};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub qrels: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads for per-topic work; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub analyzer: AnalyzerSection,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub rm3: Rm3Params,
    #[serde(default)]
    pub rrf: RrfParams,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub client: ClientConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerSection {
    pub lowercase: bool,
    pub stemmer: Stemmer,
    /// `"bundled"`, `"none"` or a path to a one-word-per-line list.
    pub stopwords: String,
}

impl Default for AnalyzerSection {
    fn default() -> Self {
        Self {
            lowercase: true,
            stemmer: Stemmer::Porter,
            stopwords: "bundled".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub strategies: Vec<StrategyKind>,
    pub num_queries: usize,
    pub m_values: Vec<usize>,
    pub temperature: f64,
    pub seed: u64,
    /// Use the offline stub generator instead of the chat client.
    pub stub: bool,
    pub layout: PromptLayout,
    /// Example queries for P3; the bundled set when absent.
    pub examples: Option<PathBuf>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            strategies: vec![StrategyKind::P1, StrategyKind::P2, StrategyKind::P3],
            num_queries: 100,
            m_values: vec![3, 5, 10, 100],
            temperature: 0.0,
            seed: 42,
            stub: false,
            layout: PromptLayout::SingleUser,
            examples: None,
        }
    }
}

impl GenerationSection {
    pub fn prompt_options(&self) -> PromptOptions {
        PromptOptions {
            n: self.num_queries,
            decoding: Decoding {
                temperature: self.temperature,
                seed: self.seed,
            },
            layout: self.layout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Significance level for the table markers.
    pub alpha: f64,
    pub alternative: Alternative,
    /// nDCG cutoff for the per-topic delta analysis.
    pub delta_ndcg_cutoff: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            alternative: Alternative::TwoSided,
            delta_ndcg_cutoff: 1000,
        }
    }
}

impl ExperimentConfig {
    /// Minimal configuration with defaults for everything but the inputs.
    pub fn new(corpus: impl Into<PathBuf>, topics: impl Into<PathBuf>, qrels: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            topics: topics.into(),
            qrels: qrels.into(),
            output: default_output(),
            workers: 0,
            analyzer: AnalyzerSection::default(),
            bm25: Bm25Params::default(),
            rm3: Rm3Params::default(),
            rrf: RrfParams::default(),
            generation: GenerationSection::default(),
            client: ClientConfig::default(),
            evaluation: EvaluationSection::default(),
        }
    }

    /// Parses TOML text, resolving relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        config.resolve(base);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| varfuse_core::Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_toml(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.corpus, &mut self.topics, &mut self.qrels, &mut self.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = self.generation.examples.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        if !matches!(self.analyzer.stopwords.as_str(), "bundled" | "none")
            && Path::new(&self.analyzer.stopwords).is_relative()
        {
            self.analyzer.stopwords = base.join(&self.analyzer.stopwords).to_string_lossy().into_owned();
        }
    }

    /// Every problem with the configuration, empty when it is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, p) in [
            ("corpus", &self.corpus),
            ("topics", &self.topics),
            ("qrels", &self.qrels),
        ] {
            if !p.is_file() {
                v.push(format!("{name} file {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.generation.examples {
            if !p.is_file() {
                v.push(format!("examples file {} does not exist", p.display()));
            }
        }
        if !matches!(self.analyzer.stopwords.as_str(), "bundled" | "none")
            && !Path::new(&self.analyzer.stopwords).is_file()
        {
            v.push(format!("stopword file {} does not exist", self.analyzer.stopwords));
        }
        for check in [self.bm25.validate(), self.rm3.validate(), self.rrf.validate()] {
            if let Err(e) = check {
                v.push(e.to_string());
            }
        }
        let g = &self.generation;
        if g.strategies.is_empty() {
            v.push("generation.strategies is empty".into());
        }
        if g.num_queries == 0 {
            v.push("generation.num_queries must be >= 1".into());
        }
        if g.m_values.is_empty() {
            v.push("generation.m_values is empty".into());
        }
        for &m in &g.m_values {
            if m == 0 {
                v.push("generation.m_values entries must be >= 1".into());
            } else if m > g.num_queries {
                v.push(format!(
                    "generation.m_values entry {m} exceeds num_queries {}",
                    g.num_queries
                ));
            }
        }
        if !(g.temperature >= 0.0 && g.temperature.is_finite()) {
            v.push(format!("generation.temperature must be >= 0, got {}", g.temperature));
        }
        let e = &self.evaluation;
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            v.push(format!("evaluation.alpha must be in (0, 1), got {}", e.alpha));
        }
        if e.delta_ndcg_cutoff == 0 {
            v.push("evaluation.delta_ndcg_cutoff must be >= 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }

    pub fn analyzer_config(&self) -> Result<AnalyzerConfig> {
        let stopwords = match self.analyzer.stopwords.as_str() {
            "bundled" => parse_stopwords(DEFAULT_STOPWORDS),
            "none" => Default::default(),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| varfuse_core::Error::io(path, e))?;
                parse_stopwords(&text)
            }
        };
        Ok(AnalyzerConfig {
            lowercase: self.analyzer.lowercase,
            stopwords,
            stemmer: self.analyzer.stemmer,
        })
    }
}
