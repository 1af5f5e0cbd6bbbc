use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{search, term_counts, Bm25Params, WeightedQuery};
use crate::error::{Error, Result};
use crate::index::Index;
use crate::warning::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight of the original query model (lambda).
    pub orig_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: 0.5,
        }
    }
}

impl Rm3Params {
    pub fn validate(&self) -> Result<()> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(Error::invalid("rm3 parameters", "fb_docs and fb_terms must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.orig_weight) {
            return Err(Error::invalid(
                "rm3 parameters",
                format!("orig_weight must be in [0, 1], got {}", self.orig_weight),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub query: WeightedQuery,
    pub warning: Option<Warning>,
}

fn sort_weighted(terms: &mut [(String, f64)]) {
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Expands a query with a relevance model estimated from the top BM25
/// feedback documents and interpolates it with the original query model.
///
/// The returned weights sum to one. Terms whose final weight is zero are
/// dropped.
pub fn rm3_expand(index: &Index, query: &str, params: &Rm3Params, bm25: &Bm25Params) -> Result<Expansion> {
    params.validate()?;
    bm25.validate()?;
    let counts = term_counts(index, query);
    let qlen: usize = counts.values().sum();
    if qlen == 0 {
        return Ok(Expansion {
            query: WeightedQuery::default(),
            warning: Some(Warning::EmptyQuery {
                query: query.to_string(),
            }),
        });
    }
    let original: Vec<(String, f64)> = counts.into_iter().map(|(t, c)| (t, c as f64 / qlen as f64)).collect();

    let feedback_params = Bm25Params {
        depth: params.fb_docs,
        ..*bm25
    };
    let feedback = search(index, query, &feedback_params)?.hits;
    let score_sum: f64 = feedback.iter().map(|h| h.score).sum();
    if feedback.is_empty() || score_sum.is_nan() || score_sum <= 0.0 {
        let mut terms = original;
        sort_weighted(&mut terms);
        return Ok(Expansion {
            query: WeightedQuery { terms },
            warning: Some(Warning::NoFeedbackDocuments {
                query: query.to_string(),
            }),
        });
    }

    let mut model: HashMap<u32, f64> = HashMap::new();
    for hit in &feedback {
        let doc = index.doc_ordinal(&hit.doc_id).expect("hit comes from this index");
        let dl = f64::from(index.doc_len(doc));
        let doc_weight = hit.score / score_sum;
        for &(term, tf) in index.doc_terms(doc) {
            *model.entry(term).or_insert(0.0) += f64::from(tf) / dl * doc_weight;
        }
    }
    let mut model: Vec<(String, f64)> = model
        .into_iter()
        .map(|(id, p)| (index.term(id).to_string(), p))
        .collect();
    sort_weighted(&mut model);
    model.truncate(params.fb_terms);
    let mass: f64 = model.iter().map(|(_, p)| p).sum();

    let lambda = params.orig_weight;
    let mut combined: HashMap<String, f64> = HashMap::new();
    for (t, p) in original {
        *combined.entry(t).or_insert(0.0) += lambda * p;
    }
    for (t, p) in model {
        *combined.entry(t).or_insert(0.0) += (1.0 - lambda) * (p / mass);
    }
    let mut terms: Vec<(String, f64)> = combined.into_iter().filter(|(_, w)| *w > 0.0).collect();
    sort_weighted(&mut terms);
    Ok(Expansion {
        query: WeightedQuery { terms },
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::AnalyzerConfig;
    use crate::index::{build, Document};
    use crate::retrieval::search_weighted;

    fn index(docs: &[(&str, &str)]) -> Index {
        build(
            docs.iter().map(|(id, t)| Ok(Document::new(*id, *t))),
            AnalyzerConfig::plain(),
        )
        .unwrap()
    }

    #[test]
    fn lambda_one_is_the_original_query_model() {
        let idx = index(&[("d1", "apple banana cherry"), ("d2", "apple apple date")]);
        let params = Rm3Params {
            orig_weight: 1.0,
            ..Default::default()
        };
        let exp = rm3_expand(&idx, "apple apple banana", &params, &Bm25Params::default()).unwrap();
        assert_eq!(
            exp.query.terms,
            vec![("apple".to_string(), 2.0 / 3.0), ("banana".to_string(), 1.0 / 3.0)]
        );
    }

    #[test]
    fn lambda_zero_single_feedback_doc() {
        let idx = index(&[("d1", "apple apple banana"), ("d2", "cherry")]);
        let params = Rm3Params {
            fb_docs: 1,
            fb_terms: 10,
            orig_weight: 0.0,
        };
        let exp = rm3_expand(&idx, "banana", &params, &Bm25Params::default()).unwrap();
        let t = &exp.query.terms;
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].0, "apple");
        assert!((t[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(t[1].0, "banana");
        assert!((t[1].1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fb_terms_limits_and_renormalizes() {
        let idx = index(&[("d1", "apple apple banana")]);
        let params = Rm3Params {
            fb_docs: 1,
            fb_terms: 1,
            orig_weight: 0.0,
        };
        let exp = rm3_expand(&idx, "banana", &params, &Bm25Params::default()).unwrap();
        assert_eq!(exp.query.terms, vec![("apple".to_string(), 1.0)]);
    }

    #[test]
    fn interpolation_sums_to_one() {
        let idx = index(&[
            ("d1", "apple banana cherry apple"),
            ("d2", "banana date"),
            ("d3", "elder fig apple"),
        ]);
        let exp = rm3_expand(&idx, "apple fig", &Rm3Params::default(), &Bm25Params::default()).unwrap();
        assert!((exp.query.total_weight() - 1.0).abs() < 1e-9);
        assert!(exp.query.weight("apple").unwrap() > 0.25);
    }

    #[test]
    fn no_feedback_falls_back_to_original_query() {
        let idx = index(&[("d1", "apple")]);
        let exp = rm3_expand(
            &idx,
            "zebra zebra quokka",
            &Rm3Params::default(),
            &Bm25Params::default(),
        )
        .unwrap();
        assert!(matches!(exp.warning, Some(Warning::NoFeedbackDocuments { .. })));
        assert_eq!(
            exp.query.terms,
            vec![("zebra".to_string(), 2.0 / 3.0), ("quokka".to_string(), 1.0 / 3.0)]
        );
        let res = search_weighted(&idx, &exp.query, &Bm25Params::default()).unwrap();
        assert!(res.hits.is_empty());
    }

    #[test]
    fn invalid_parameters() {
        let idx = index(&[("d1", "apple")]);
        for p in [
            Rm3Params {
                fb_docs: 0,
                ..Default::default()
            },
            Rm3Params {
                fb_terms: 0,
                ..Default::default()
            },
            Rm3Params {
                orig_weight: 1.5,
                ..Default::default()
            },
        ] {
            assert!(rm3_expand(&idx, "apple", &p, &Bm25Params::default()).is_err());
        }
    }
}
