//! Reciprocal Rank Fusion.
//!
//! A document's fused score is the sum over input rankings that contain it
//! of `1 / (k + rank)`, with 1-based ranks. Documents missing from a ranking
//! get nothing from it. Only ranks are read; input scores are ignored.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{rank_order, Ranking, ScoredDoc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrfParams {
    pub k: f64,
    pub cutoff: usize,
}

impl Default for RrfParams {
    fn default() -> Self {
        Self { k: 60.0, cutoff: 1000 }
    }
}

impl RrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(
                "rrf parameters",
                format!("k must be >= 0, got {}", self.k),
            ));
        }
        if self.cutoff == 0 {
            return Err(Error::invalid("rrf parameters", "cutoff must be >= 1"));
        }
        Ok(())
    }
}

/// Fuses rankings of a single topic. The result's `system_tag` is empty;
/// callers name the fused run.
pub fn rrf_fuse(rankings: &[Ranking], params: &RrfParams) -> Result<Ranking> {
    params.validate()?;
    let first = rankings
        .first()
        .ok_or_else(|| Error::invalid("fusion input", "no rankings to fuse"))?;
    if let Some(other) = rankings.iter().find(|r| r.topic_id != first.topic_id) {
        return Err(Error::invalid(
            "fusion input",
            format!("mixed topics {:?} and {:?}", first.topic_id, other.topic_id),
        ));
    }

    // Contributions are collected per document and summed smallest first so
    // the result does not depend on the order of the input rankings.
    let mut contributions: HashMap<&str, Vec<f64>> = HashMap::new();
    for ranking in rankings {
        for (i, entry) in ranking.entries.iter().enumerate() {
            let rank = (i + 1) as f64;
            contributions
                .entry(entry.doc_id.as_str())
                .or_default()
                .push(1.0 / (params.k + rank));
        }
    }
    let mut fused: Vec<ScoredDoc> = contributions
        .into_iter()
        .map(|(doc, mut parts)| {
            parts.sort_by(f64::total_cmp);
            ScoredDoc::new(doc, parts.iter().sum())
        })
        .collect();
    fused.sort_by(|a, b| rank_order(a.score, &a.doc_id, b.score, &b.doc_id));
    fused.truncate(params.cutoff);
    Ok(Ranking::new(first.topic_id.clone(), String::new(), fused))
}

/// Fuses exactly the first `m` rankings, in the order given.
pub fn fuse_first_m(variant_rankings: &[Ranking], m: usize, params: &RrfParams) -> Result<Ranking> {
    if m == 0 || m > variant_rankings.len() {
        return Err(Error::invalid(
            "fusion input",
            format!("m = {m} outside 1..={}", variant_rankings.len()),
        ));
    }
    rrf_fuse(&variant_rankings[..m], params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(topic: &str, docs: &[&str]) -> Ranking {
        let n = docs.len();
        Ranking::new(
            topic,
            "run",
            docs.iter()
                .enumerate()
                .map(|(i, d)| ScoredDoc::new(*d, (n - i) as f64))
                .collect(),
        )
    }

    fn ids(r: &Ranking) -> Vec<&str> {
        r.doc_ids().collect()
    }

    #[test]
    fn single_ranking_keeps_order() {
        let fused = rrf_fuse(&[ranking("1", &["A", "B", "C"])], &RrfParams::default()).unwrap();
        assert_eq!(ids(&fused), vec!["A", "B", "C"]);
        let scores: Vec<f64> = fused.entries.iter().map(|e| e.score).collect();
        assert_eq!(scores, vec![1.0 / 61.0, 1.0 / 62.0, 1.0 / 63.0]);
    }

    #[test]
    fn symmetric_inputs_tie_and_break_by_doc_id() {
        let fused = rrf_fuse(
            &[ranking("1", &["B", "A"]), ranking("1", &["A", "B"])],
            &RrfParams::default(),
        )
        .unwrap();
        assert_eq!(ids(&fused), vec!["A", "B"]);
        let expected = 1.0 / 61.0 + 1.0 / 62.0;
        assert!((fused.entries[0].score - expected).abs() < 1e-12);
        assert_eq!(fused.entries[0].score, fused.entries[1].score);
        assert!((expected - 0.032522475).abs() < 1e-9);
    }

    #[test]
    fn document_in_more_rankings_rises() {
        let fused = rrf_fuse(
            &[ranking("1", &["A", "B", "C"]), ranking("1", &["B"])],
            &RrfParams::default(),
        )
        .unwrap();
        assert_eq!(ids(&fused), vec!["B", "A", "C"]);
        assert!((fused.entries[0].score - (1.0 / 62.0 + 1.0 / 61.0)).abs() < 1e-12);
    }

    #[test]
    fn cutoff_truncates() {
        let params = RrfParams { k: 60.0, cutoff: 2 };
        let fused = rrf_fuse(&[ranking("1", &["A", "B", "C"])], &params).unwrap();
        assert_eq!(ids(&fused), vec!["A", "B"]);
    }

    #[test]
    fn errors() {
        assert!(rrf_fuse(&[], &RrfParams::default()).is_err());
        let mixed = [ranking("1", &["A"]), ranking("2", &["A"])];
        assert!(rrf_fuse(&mixed, &RrfParams::default()).is_err());
        let bad = RrfParams { k: -1.0, cutoff: 10 };
        assert!(rrf_fuse(&[ranking("1", &["A"])], &bad).is_err());
    }

    #[test]
    fn first_m_selects_prefix() {
        let variants = [
            ranking("1", &["A", "B"]),
            ranking("1", &["C", "D"]),
            ranking("1", &["C", "E"]),
        ];
        let p = RrfParams::default();
        assert_eq!(ids(&fuse_first_m(&variants, 1, &p).unwrap()), vec!["A", "B"]);
        let two = fuse_first_m(&variants, 2, &p).unwrap();
        assert!(!ids(&two).contains(&"E"));
        assert_eq!(
            fuse_first_m(&variants, 3, &p).unwrap(),
            rrf_fuse(&variants, &p).unwrap()
        );
        assert!(fuse_first_m(&variants, 0, &p).is_err());
        assert!(fuse_first_m(&variants, 4, &p).is_err());
    }
}
