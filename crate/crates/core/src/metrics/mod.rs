//! Test-collection evaluation measures.
//!
//! Conventions follow `trec_eval`: unjudged documents count as nonrelevant
//! for precision, AP and nDCG, and are ignored by bpref. nDCG uses linear
//! gains with a `log2(rank + 1)` discount. Measures that need at least one
//! relevant document return `None` for topics without one.

mod report;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::Ranking;
use crate::warning::Warning;

pub use report::{render_jsonl, render_table, RunReport};
pub use stats::{paired_test, Alternative, PairedTest};

/// Judgments for one topic: doc id to grade. Grade 0 is judged nonrelevant.
pub type Judgments = HashMap<String, u32>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    topics: BTreeMap<String, Judgments>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a grade, returning the previous one if the pair was already judged.
    pub fn insert(&mut self, topic_id: &str, doc_id: &str, grade: u32) -> Option<u32> {
        self.topics
            .entry(topic_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade)
    }

    pub fn topic(&self, topic_id: &str) -> Option<&Judgments> {
        self.topics.get(topic_id)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &Judgments)> {
        self.topics.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Number of documents with grade > 0 for a topic.
    pub fn num_relevant(&self, topic_id: &str) -> usize {
        self.topic(topic_id).map_or(0, num_relevant)
    }

    pub fn num_judgments(&self) -> usize {
        self.topics.values().map(HashMap::len).sum()
    }
}

fn num_relevant(judged: &Judgments) -> usize {
    judged.values().filter(|&&g| g > 0).count()
}

fn grade(judged: &Judgments, doc_id: &str) -> Option<u32> {
    judged.get(doc_id).copied()
}

fn is_relevant(judged: &Judgments, doc_id: &str) -> bool {
    grade(judged, doc_id).is_some_and(|g| g > 0)
}

/// Fraction of the top `k` that is relevant. Short rankings are padded with
/// nonrelevant documents.
pub fn precision_at(ranking: &Ranking, judged: &Judgments, k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be >= 1");
    let hits = ranking.doc_ids().take(k).filter(|d| is_relevant(judged, d)).count();
    hits as f64 / k as f64
}

pub fn ndcg_at(ranking: &Ranking, judged: &Judgments, k: usize) -> Option<f64> {
    assert!(k >= 1, "nDCG cutoff must be >= 1");
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .doc_ids()
        .take(k)
        .enumerate()
        .map(|(i, d)| f64::from(grade(judged, d).unwrap_or(0)) / discount(i))
        .sum();
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / discount(i))
        .sum();
    Some(dcg / idcg)
}

pub fn average_precision(ranking: &Ranking, judged: &Judgments, depth: usize) -> Option<f64> {
    let r = num_relevant(judged);
    if r == 0 {
        return None;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.doc_ids().take(depth).enumerate() {
        if is_relevant(judged, d) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    Some(sum / r as f64)
}

pub fn bpref(ranking: &Ranking, judged: &Judgments) -> Option<f64> {
    let r = num_relevant(judged);
    if r == 0 {
        return None;
    }
    let n = judged.len() - r;
    let denom = r.min(n);
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for d in ranking.doc_ids() {
        match grade(judged, d) {
            None => {}
            Some(0) => nonrel_above += 1,
            Some(_) => {
                sum += if denom == 0 {
                    1.0
                } else {
                    1.0 - nonrel_above.min(r) as f64 / denom as f64
                };
            }
        }
    }
    Some(sum / r as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Precision(usize),
    Ndcg(usize),
    /// Mean average precision over rankings truncated at this depth.
    Map(usize),
    Bpref,
}

impl Metric {
    /// The four measures reported per run: P@10, nDCG@10, Bpref, MAP.
    pub const STANDARD: [Metric; 4] = [
        Metric::Precision(10),
        Metric::Ndcg(10),
        Metric::Bpref,
        Metric::Map(1000),
    ];

    pub fn evaluate(&self, ranking: &Ranking, judged: &Judgments) -> Option<f64> {
        match *self {
            Metric::Precision(k) => Some(precision_at(ranking, judged, k)),
            Metric::Ndcg(k) => ndcg_at(ranking, judged, k),
            Metric::Map(depth) => average_precision(ranking, judged, depth),
            Metric::Bpref => bpref(ranking, judged),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Precision(k) => write!(f, "P@{k}"),
            Metric::Ndcg(k) => write!(f, "nDCG@{k}"),
            Metric::Map(_) => f.write_str("MAP"),
            Metric::Bpref => f.write_str("Bpref"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Significance {
    pub baseline: String,
    pub test: String,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub per_topic: BTreeMap<String, f64>,
    pub aggregate: f64,
    pub significance: Vec<Significance>,
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-topic scores for every topic of `run`. Topics missing from the qrels,
/// or for which the measure is undefined, are skipped with a warning.
pub fn per_topic(run: &[Ranking], qrels: &Qrels, metric: Metric) -> (BTreeMap<String, f64>, Vec<Warning>) {
    let mut scores = BTreeMap::new();
    let mut warnings = Vec::new();
    for ranking in run {
        let Some(judged) = qrels.topic(&ranking.topic_id) else {
            warnings.push(Warning::SkippedTopic {
                topic_id: ranking.topic_id.clone(),
                reason: "no judgments".into(),
            });
            continue;
        };
        match metric.evaluate(ranking, judged) {
            Some(v) => {
                scores.insert(ranking.topic_id.clone(), v);
            }
            None => warnings.push(Warning::SkippedTopic {
                topic_id: ranking.topic_id.clone(),
                reason: format!("no relevant documents, {metric} undefined"),
            }),
        }
    }
    (scores, warnings)
}

pub fn evaluate(run: &[Ranking], qrels: &Qrels, metric: Metric) -> (MetricReport, Vec<Warning>) {
    let (per_topic, warnings) = per_topic(run, qrels, metric);
    let aggregate = mean(per_topic.values().copied());
    (
        MetricReport {
            metric: metric.label(),
            per_topic,
            aggregate,
            significance: Vec::new(),
        },
        warnings,
    )
}

/// Per-topic difference `fused - baseline`, largest first (ties by topic id).
pub fn delta_per_topic(
    fused: &[Ranking],
    baseline: &[Ranking],
    qrels: &Qrels,
    metric: Metric,
) -> Result<Vec<(String, f64)>> {
    let (a, _) = per_topic(fused, qrels, metric);
    let (b, _) = per_topic(baseline, qrels, metric);
    delta_from_scores(&a, &b)
}

pub fn delta_from_scores(
    fused: &BTreeMap<String, f64>,
    baseline: &BTreeMap<String, f64>,
) -> Result<Vec<(String, f64)>> {
    let mut deltas: Vec<(String, f64)> = fused
        .iter()
        .filter_map(|(t, a)| baseline.get(t).map(|b| (t.clone(), a - b)))
        .collect();
    if deltas.is_empty() {
        return Err(Error::invalid("delta analysis", "runs share no evaluated topics"));
    }
    deltas.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    Ok(deltas)
}
