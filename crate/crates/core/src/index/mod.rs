//! Single-segment, immutable inverted index.
//!
//! Documents get ordinals in ingestion order. Terms are stored sorted, each
//! with a postings list sorted by ordinal. A forward view (document to
//! term frequencies) is derived on construction for relevance feedback.

mod persist;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::AnalyzerConfig;
use crate::error::{Error, Result};

pub use persist::{dump_text, FORMAT_VERSION, MAGIC};

/// One corpus record as ingested from JSON lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            title: None,
        }
    }

    fn indexable_text(&self) -> String {
        match &self.title {
            Some(title) => format!("{title}\n{}", self.text),
            None => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    analyzer: AnalyzerConfig,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    // derived
    term_lookup: HashMap<String, u32>,
    doc_lookup: HashMap<String, u32>,
    cf: Vec<u64>,
    total_len: u64,
    forward: Vec<Vec<(u32, u32)>>,
}

impl Index {
    /// Assembles an index from its stored parts and derives the lookup tables.
    fn from_parts(
        analyzer: AnalyzerConfig,
        doc_ids: Vec<String>,
        doc_lens: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Result<Self> {
        let mut doc_lookup = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if doc_lookup.insert(id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateDocument(id.clone()));
            }
        }
        let term_lookup = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let mut forward = vec![Vec::new(); doc_ids.len()];
        let mut cf = Vec::with_capacity(terms.len());
        for (term, list) in postings.iter().enumerate() {
            let mut sum = 0u64;
            for p in list {
                sum += u64::from(p.tf);
                forward[p.doc as usize].push((term as u32, p.tf));
            }
            cf.push(sum);
        }
        let total_len = doc_lens.iter().map(|&l| u64::from(l)).sum();
        Ok(Self {
            analyzer,
            doc_ids,
            doc_lens,
            terms,
            postings,
            term_lookup,
            doc_lookup,
            cf,
            total_len,
            forward,
        })
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Mean analyzed document length; 0 for an empty index.
    pub fn avg_doc_len(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.doc_ids.len() as f64
        }
    }

    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn doc_id(&self, ordinal: u32) -> &str {
        &self.doc_ids[ordinal as usize]
    }

    pub fn doc_ordinal(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn doc_len(&self, ordinal: u32) -> u32 {
        self.doc_lens[ordinal as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    /// Postings for an analyzed term; empty when the term is unknown.
    pub fn postings(&self, term: &str) -> &[Posting] {
        match self.term_id(term) {
            Some(id) => &self.postings[id as usize],
            None => &[],
        }
    }

    pub fn postings_by_id(&self, id: u32) -> &[Posting] {
        &self.postings[id as usize]
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.term_id(term).map_or(0, |id| self.cf[id as usize])
    }

    /// `(term id, tf)` pairs of one document, ascending by term id.
    pub fn doc_terms(&self, ordinal: u32) -> &[(u32, u32)] {
        &self.forward[ordinal as usize]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::load(path)
    }
}

/// Accumulates documents and produces an [`Index`].
#[derive(Debug)]
pub struct IndexBuilder {
    analyzer: AnalyzerConfig,
    doc_ids: Vec<String>,
    seen: HashMap<String, u32>,
    doc_lens: Vec<u32>,
    postings: HashMap<String, Vec<Posting>>,
}

impl IndexBuilder {
    pub fn new(analyzer: AnalyzerConfig) -> Self {
        Self {
            analyzer,
            doc_ids: Vec::new(),
            seen: HashMap::new(),
            doc_lens: Vec::new(),
            postings: HashMap::new(),
        }
    }

    pub fn add(&mut self, doc: &Document) -> Result<()> {
        if doc.doc_id.is_empty() {
            return Err(Error::invalid("document", "empty doc_id"));
        }
        if self.seen.contains_key(&doc.doc_id) {
            return Err(Error::DuplicateDocument(doc.doc_id.clone()));
        }
        let ordinal = self.doc_ids.len() as u32;
        let tokens = self.analyzer.analyze(&doc.indexable_text());
        let mut counts: HashMap<String, u32> = HashMap::new();
        for t in &tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            self.postings
                .entry(term)
                .or_default()
                .push(Posting { doc: ordinal, tf });
        }
        self.seen.insert(doc.doc_id.clone(), ordinal);
        self.doc_ids.push(doc.doc_id.clone());
        self.doc_lens.push(tokens.len() as u32);
        Ok(())
    }

    pub fn finish(self) -> Index {
        let mut entries: Vec<(String, Vec<Posting>)> = self.postings.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (terms, postings): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Index::from_parts(self.analyzer, self.doc_ids, self.doc_lens, terms, postings)
            .expect("builder rejects duplicate ids")
    }
}

/// Builds an index from a stream of documents.
pub fn build<I>(corpus: I, analyzer: AnalyzerConfig) -> Result<Index>
where
    I: IntoIterator<Item = Result<Document>>,
{
    let mut builder = IndexBuilder::new(analyzer);
    for doc in corpus {
        builder.add(&doc?)?;
    }
    Ok(builder.finish())
}

/// Streams documents from a JSON-lines corpus file.
///
/// Each non-blank line is an object with `doc_id`, `text` and an optional
/// `title`. Corpora in other formats (for example TREC SGML) have to be
/// converted to this layout first.
pub fn read_corpus(path: &Path) -> Result<impl Iterator<Item = Result<Document>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let path = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(Error::io(&path, e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => {
                Some(serde_json::from_str::<Document>(&l).map_err(|e| Error::parse("corpus", i + 1, e.to_string())))
            }
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(pairs: &[(&str, &str)]) -> Vec<Result<Document>> {
        pairs.iter().map(|(id, t)| Ok(Document::new(*id, *t))).collect()
    }

    #[test]
    fn empty_corpus() {
        let index = build(Vec::new(), AnalyzerConfig::default()).unwrap();
        assert_eq!(index.num_docs(), 0);
        assert_eq!(index.num_terms(), 0);
        assert_eq!(index.avg_doc_len(), 0.0);
    }

    #[test]
    fn two_document_statistics() {
        let index = build(
            docs(&[("d1", "apple banana"), ("d2", "apple")]),
            AnalyzerConfig::plain(),
        )
        .unwrap();
        assert_eq!(index.num_docs(), 2);
        assert_eq!(index.df("apple"), 2);
        assert_eq!(index.df("banana"), 1);
        assert_eq!(index.avg_doc_len(), 1.5);
        assert_eq!(
            index.postings("apple"),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 1 }]
        );
        assert_eq!(index.doc_id(1), "d2");
        assert!(index.postings("cherry").is_empty());
    }

    #[test]
    fn repeated_term_aggregates_into_one_posting() {
        let index = build(docs(&[("d1", "apple apple pear")]), AnalyzerConfig::plain()).unwrap();
        assert_eq!(index.postings("apple"), &[Posting { doc: 0, tf: 2 }]);
        assert_eq!(index.cf("apple"), 2);
    }

    #[test]
    fn ingestion_order_does_not_change_statistics() {
        let a = build(
            docs(&[("d1", "apple banana"), ("d2", "apple")]),
            AnalyzerConfig::plain(),
        )
        .unwrap();
        let b = build(
            docs(&[("d2", "apple"), ("d1", "apple banana")]),
            AnalyzerConfig::plain(),
        )
        .unwrap();
        assert_eq!(a.num_docs(), b.num_docs());
        assert_eq!(a.avg_doc_len(), b.avg_doc_len());
        for t in a.terms() {
            assert_eq!(a.df(t), b.df(t));
            assert_eq!(a.cf(t), b.cf(t));
        }
        assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn duplicate_doc_id_is_rejected_by_name() {
        let err = build(docs(&[("d1", "x"), ("d1", "y")]), AnalyzerConfig::plain()).unwrap_err();
        assert!(matches!(&err, Error::DuplicateDocument(id) if id == "d1"));
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn title_is_indexed_with_text() {
        let doc = Document {
            doc_id: "d1".into(),
            text: "body".into(),
            title: Some("heading".into()),
        };
        let index = build(vec![Ok(doc)], AnalyzerConfig::plain()).unwrap();
        assert_eq!(index.df("heading"), 1);
        assert_eq!(index.doc_len(0), 2);
    }

    #[test]
    fn missing_corpus_file_reports_path() {
        let err = read_corpus(Path::new("/nonexistent/corpus.jsonl")).err().unwrap();
        assert!(err.to_string().contains("/nonexistent/corpus.jsonl"));
    }

    #[test]
    fn bad_corpus_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"doc_id\":\"a\",\"text\":\"x\"}\n\nnot json\n").unwrap();
        let err = build(read_corpus(&path).unwrap(), AnalyzerConfig::plain()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }
}
