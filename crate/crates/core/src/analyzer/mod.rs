//! Text analysis: tokenization, lowercasing, stopword removal and stemming.
//!
//! The same chain is applied to documents at index time and to queries at
//! search time. It is a pure function of `(AnalyzerConfig, text)`.

pub mod porter;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The bundled English stopword list.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    None,
    #[default]
    Porter,
}

impl Stemmer {
    pub fn as_str(self) -> &'static str {
        match self {
            Stemmer::None => "none",
            Stemmer::Porter => "porter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stemmer: Stemmer,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            stemmer: Stemmer::Porter,
        }
    }
}

impl AnalyzerConfig {
    /// No stopwords, no stemming, lowercasing on.
    pub fn plain() -> Self {
        Self {
            lowercase: true,
            stopwords: BTreeSet::new(),
            stemmer: Stemmer::None,
        }
    }

    pub fn with_stopword_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_stopwords(&text);
        Ok(self)
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        analyze(self, text)
    }
}

/// Parses a stopword list: one word per line, `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Maximal runs of alphanumeric characters, in order.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

pub fn analyze(config: &AnalyzerConfig, text: &str) -> Vec<String> {
    tokenize(text)
        .filter_map(|raw| {
            let token = if config.lowercase {
                raw.to_lowercase()
            } else {
                raw.to_string()
            };
            if config.stopwords.contains(&token) {
                return None;
            }
            Some(match config.stemmer {
                Stemmer::None => token,
                Stemmer::Porter => porter::stem(&token),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    #[test]
    fn empty_text_yields_nothing() {
        assert!(analyze(&AnalyzerConfig::default(), "").is_empty());
        assert!(analyze(&AnalyzerConfig::plain(), "  ,;  ").is_empty());
    }

    #[test]
    fn stopword_only_text_yields_nothing() {
        assert!(analyze(&AnalyzerConfig::default(), "a an the of").is_empty());
    }

    #[test]
    fn golden_airbus_subsidies() {
        // Stems checked against an independent Porter (1980) implementation.
        let terms = analyze(&AnalyzerConfig::default(), "The AIRBUS subsidies");
        assert_eq!(terms, vec!["airbu", "subsidi"]);
    }

    #[test]
    fn splits_on_non_alphanumerics_and_keeps_digits() {
        let terms = analyze(&AnalyzerConfig::plain(), "U.S. trade-deficit 1990, x");
        assert_eq!(terms, vec!["u", "s", "trade", "deficit", "1990", "x"]);
    }

    #[test]
    fn lowercase_can_be_disabled() {
        let config = AnalyzerConfig {
            lowercase: false,
            ..AnalyzerConfig::plain()
        };
        assert_eq!(analyze(&config, "Airbus EU"), vec!["Airbus", "EU"]);
    }

    #[test]
    fn stopword_file_parsing_skips_comments() {
        let words = parse_stopwords("# header\nthe\n\n  And \n#x\n");
        assert_eq!(words.into_iter().collect::<Vec<_>>(), vec!["and", "the"]);
    }

    #[test]
    fn bundled_stopword_list_is_pinned() {
        let digest = Sha256::digest(DEFAULT_STOPWORDS.as_bytes());
        assert_eq!(
            hex::encode(digest),
            "128be6c707837c6f54e821337d328d9379281445337f20fc3d5e29c0a6e82960"
        );
        let words = parse_stopwords(DEFAULT_STOPWORDS);
        assert_eq!(words.len(), 153);
        assert!(words.contains("the") && words.contains("of"));
    }
}
