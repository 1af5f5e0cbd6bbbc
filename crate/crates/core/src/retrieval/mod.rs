//! BM25 ranking and RM3 pseudo-relevance feedback over an [`Index`].

mod rm3;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;
use crate::warning::Warning;

pub use rm3::{rm3_expand, Expansion, Rm3Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Ranked documents for one topic from one system. Ranks are implicit: the
/// first entry has rank 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking {
    pub topic_id: String,
    pub system_tag: String,
    pub entries: Vec<ScoredDoc>,
}

impl Ranking {
    pub fn new(topic_id: impl Into<String>, system_tag: impl Into<String>, entries: Vec<ScoredDoc>) -> Self {
        Self {
            topic_id: topic_id.into(),
            system_tag: system_tag.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Checks that scores are non-increasing and doc ids unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::validation(
                    "ranking",
                    format!("topic {}: document {} appears twice", self.topic_id, e.doc_id),
                ));
            }
            if i > 0 && (e.score.is_nan() || self.entries[i - 1].score.is_nan() || self.entries[i - 1].score < e.score)
            {
                return Err(Error::validation(
                    "ranking",
                    format!("topic {}: score increases at rank {}", self.topic_id, i + 1),
                ));
            }
        }
        Ok(())
    }
}

/// Orders by descending score, then ascending doc id.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub depth: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            depth: 1000,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::invalid(
                "bm25 parameters",
                format!("k1 must be > 0, got {}", self.k1),
            ));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(
                "bm25 parameters",
                format!("b must be in [0, 1], got {}", self.b),
            ));
        }
        if self.depth == 0 {
            return Err(Error::invalid("bm25 parameters", "depth must be >= 1"));
        }
        Ok(())
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
fn idf(df: usize, num_docs: usize) -> f64 {
    let df = df as f64;
    (1.0 + (num_docs as f64 - df + 0.5) / (df + 0.5)).ln()
}

fn tf_part(tf: u32, dl: u32, avgdl: f64, params: &Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = params.k1 * (1.0 - params.b + params.b * f64::from(dl) / avgdl);
    tf * (params.k1 + 1.0) / (tf + norm)
}

/// BM25 contribution of one term to one document.
pub fn bm25_term_score(tf: u32, dl: u32, df: usize, num_docs: usize, avgdl: f64, params: &Bm25Params) -> Result<f64> {
    if avgdl.is_nan() || avgdl <= 0.0 {
        return Err(Error::invalid("bm25 input", format!("avgdl must be > 0, got {avgdl}")));
    }
    if df == 0 || df > num_docs {
        return Err(Error::invalid(
            "bm25 input",
            format!("need 1 <= df <= N, got df={df}, N={num_docs}"),
        ));
    }
    params.validate()?;
    if tf == 0 {
        return Ok(0.0);
    }
    Ok(idf(df, num_docs) * tf_part(tf, dl, avgdl, params))
}

/// A query as weighted analyzed terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedQuery {
    pub terms: Vec<(String, f64)>,
}

impl WeightedQuery {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|(_, w)| w).sum()
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|(t, _)| t == term).map(|(_, w)| *w)
    }
}

/// Hits for one query plus any warning raised while producing them.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub hits: Vec<ScoredDoc>,
    pub warning: Option<Warning>,
}

impl SearchResult {
    pub fn into_ranking(self, topic_id: impl Into<String>, system_tag: impl Into<String>) -> Ranking {
        Ranking::new(topic_id, system_tag, self.hits)
    }
}

/// Analyzed query terms with their multiplicities, in term order.
pub(crate) fn term_counts(index: &Index, query: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in index.analyzer().analyze(query) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Ranks documents by BM25 summed over the analyzed query terms, counting
/// repeated terms once per occurrence.
pub fn search(index: &Index, query: &str, params: &Bm25Params) -> Result<SearchResult> {
    params.validate()?;
    let counts = term_counts(index, query);
    if counts.is_empty() {
        return Ok(SearchResult {
            hits: Vec::new(),
            warning: Some(Warning::EmptyQuery {
                query: query.to_string(),
            }),
        });
    }
    let weighted: Vec<(String, f64)> = counts.into_iter().map(|(t, c)| (t, c as f64)).collect();
    Ok(SearchResult {
        hits: score_terms(index, &weighted, params),
        warning: None,
    })
}

/// Like [`search`], with each term's contribution multiplied by its weight.
pub fn search_weighted(index: &Index, query: &WeightedQuery, params: &Bm25Params) -> Result<SearchResult> {
    params.validate()?;
    if let Some((t, w)) = query.terms.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("weighted query", format!("term {t:?} has weight {w}")));
    }
    if query.terms.is_empty() {
        return Ok(SearchResult {
            hits: Vec::new(),
            warning: Some(Warning::EmptyQuery { query: String::new() }),
        });
    }
    Ok(SearchResult {
        hits: score_terms(index, &query.terms, params),
        warning: None,
    })
}

/// Scoring kernel shared by plain and weighted search.
///
/// Per-document contributions are summed in ascending order of value so a
/// document's score does not depend on which term supplied which addend.
fn score_terms(index: &Index, terms: &[(String, f64)], params: &Bm25Params) -> Vec<ScoredDoc> {
    let n = index.num_docs();
    let avgdl = index.avg_doc_len();
    if n == 0 || avgdl <= 0.0 {
        return Vec::new();
    }
    let mut contributions: Vec<(u32, f64)> = Vec::new();
    for (term, weight) in terms {
        if *weight == 0.0 {
            continue;
        }
        let Some(id) = index.term_id(term) else { continue };
        let postings = index.postings_by_id(id);
        let term_idf = idf(postings.len(), n);
        for p in postings {
            let s = term_idf * tf_part(p.tf, index.doc_len(p.doc), avgdl, params);
            contributions.push((p.doc, weight * s));
        }
    }
    contributions.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut scored: Vec<(u32, f64)> = Vec::new();
    for (doc, c) in contributions {
        match scored.last_mut() {
            Some((d, s)) if *d == doc => *s += c,
            _ => scored.push((doc, c)),
        }
    }
    top_k(index, scored, params.depth)
}

fn top_k(index: &Index, mut scored: Vec<(u32, f64)>, depth: usize) -> Vec<ScoredDoc> {
    let cmp = |a: &(u32, f64), b: &(u32, f64)| rank_order(a.1, index.doc_id(a.0), b.1, index.doc_id(b.0));
    if scored.len() > depth {
        scored.select_nth_unstable_by(depth - 1, cmp);
        scored.truncate(depth);
    }
    scored.sort_unstable_by(cmp);
    scored
        .into_iter()
        .map(|(doc, score)| ScoredDoc::new(index.doc_id(doc), score))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::AnalyzerConfig;
    use crate::index::{build, Document};

    fn index(docs: &[(&str, &str)]) -> Index {
        build(
            docs.iter().map(|(id, t)| Ok(Document::new(*id, *t))),
            AnalyzerConfig::plain(),
        )
        .unwrap()
    }

    fn defaults() -> Bm25Params {
        Bm25Params::default()
    }

    #[test]
    fn absent_term_scores_zero() {
        assert_eq!(bm25_term_score(0, 3, 1, 2, 1.5, &defaults()).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_scores() {
        let s = bm25_term_score(1, 2, 1, 2, 2.0, &defaults()).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
        let s = bm25_term_score(1, 10, 1000, 1000, 10.0, &defaults()).unwrap();
        assert!((s - (1.0f64 + 0.5 / 1000.5).ln()).abs() < 1e-15);
        assert!(s > 0.0 && (s - 0.000499625).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(bm25_term_score(1, 1, 1, 2, 0.0, &defaults()).is_err());
        assert!(bm25_term_score(1, 1, 3, 2, 1.0, &defaults()).is_err());
        let bad = Bm25Params { b: 1.5, ..defaults() };
        assert!(bad.validate().is_err());
        let bad = Bm25Params { depth: 0, ..defaults() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_term_search() {
        let idx = index(&[("d1", "apple banana"), ("d2", "apple")]);
        let res = search(&idx, "banana", &defaults()).unwrap();
        assert!(res.warning.is_none());
        assert_eq!(res.hits.len(), 1);
        assert_eq!(res.hits[0].doc_id, "d1");
        let expected = bm25_term_score(1, 2, 1, 2, 1.5, &defaults()).unwrap();
        assert_eq!(res.hits[0].score, expected);
    }

    #[test]
    fn no_matching_terms_gives_empty_ranking_without_warning() {
        let idx = index(&[("d1", "apple banana")]);
        let res = search(&idx, "cherry", &defaults()).unwrap();
        assert!(res.hits.is_empty());
        assert!(res.warning.is_none());
    }

    #[test]
    fn query_without_terms_warns() {
        let idx = index(&[("d1", "apple banana")]);
        let res = search(&idx, " ,, ", &defaults()).unwrap();
        assert!(res.hits.is_empty());
        assert!(matches!(res.warning, Some(Warning::EmptyQuery { .. })));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = index(&[("zeta", "apple pear"), ("alpha", "apple pear"), ("mid", "pear pear")]);
        let res = search(&idx, "apple", &defaults()).unwrap();
        let ids: Vec<_> = res.hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "zeta"]);
        assert_eq!(res.hits[0].score, res.hits[1].score);
    }

    #[test]
    fn depth_truncates() {
        let docs: Vec<(String, String)> = (0..20).map(|i| (format!("d{i:02}"), "apple".to_string())).collect();
        let refs: Vec<(&str, &str)> = docs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let idx = index(&refs);
        let params = Bm25Params { depth: 5, ..defaults() };
        let res = search(&idx, "apple", &params).unwrap();
        let ids: Vec<_> = res.hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["d00", "d01", "d02", "d03", "d04"]);
    }

    #[test]
    fn repeated_query_term_counts_twice() {
        let idx = index(&[("d1", "apple banana"), ("d2", "apple"), ("d3", "banana cherry")]);
        let once = search(&idx, "banana", &defaults()).unwrap();
        let twice = search(&idx, "banana banana", &defaults()).unwrap();
        for (a, b) in once.hits.iter().zip(&twice.hits) {
            assert_eq!(a.doc_id, b.doc_id);
            assert!((2.0 * a.score - b.score).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_term_contributes_nothing() {
        let idx = index(&[("d1", "apple banana"), ("d2", "apple"), ("d3", "banana")]);
        let q = WeightedQuery {
            terms: vec![("apple".into(), 1.0), ("banana".into(), 0.0)],
        };
        let weighted = search_weighted(&idx, &q, &defaults()).unwrap();
        let plain = search(&idx, "apple", &defaults()).unwrap();
        assert_eq!(weighted.hits, plain.hits);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let idx = index(&[("d1", "apple")]);
        let q = WeightedQuery {
            terms: vec![("apple".into(), -1.0)],
        };
        assert!(search_weighted(&idx, &q, &defaults()).is_err());
    }

    #[test]
    fn ranking_validation() {
        let ok = Ranking::new("1", "t", vec![ScoredDoc::new("a", 2.0), ScoredDoc::new("b", 2.0)]);
        assert!(ok.validate().is_ok());
        let inverted = Ranking::new("1", "t", vec![ScoredDoc::new("a", 1.0), ScoredDoc::new("b", 2.0)]);
        assert!(inverted.validate().is_err());
        let dup = Ranking::new("1", "t", vec![ScoredDoc::new("a", 2.0), ScoredDoc::new("a", 1.0)]);
        assert!(dup.validate().is_err());
    }
}
