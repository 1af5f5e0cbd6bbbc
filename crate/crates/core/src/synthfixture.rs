//! Seeded synthetic test collections with constructed relevance.
//!
//! Every topic owns a disjoint set of latent terms drawn from a pseudo-word
//! vocabulary. The title names a few of them and the description and
//! narrative name the rest. Relevant documents mix the topic's latent terms
//! with background words; judged non-relevant "distractor" documents repeat
//! the title terms but none of the other latent terms, so a title-only query
//! is easily misled while queries that also use the description are not.
//! The remaining documents are pure background and stay unjudged.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::AnalyzerConfig;
use crate::error::{Error, Result};
use crate::index::Document;
use crate::metrics::Qrels;
use crate::querygen::Topic;
use crate::trecio::{format_qrels, format_topics, write_file};

const LATENT_TERMS: usize = 8;
const MIN_BACKGROUND: usize = 50;
const DOC_LEN: std::ops::RangeInclusive<usize> = 30..=60;
/// Chance that a relevant document uses a given latent term at all.
const LATENT_COVERAGE: f64 = 0.6;
/// Share of a distractor's tokens drawn from the title terms.
const DISTRACTOR_TITLE_SHARE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_topics: usize,
    pub docs_per_topic: usize,
    pub relevant_per_topic: usize,
    pub vocab_size: usize,
    /// Share of a relevant document's tokens drawn from the background.
    pub noise_ratio: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_topics: 5,
            docs_per_topic: 40,
            relevant_per_topic: 10,
            vocab_size: 2000,
            noise_ratio: 0.5,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn num_docs(&self) -> usize {
        self.num_topics * self.docs_per_topic
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("num_topics", self.num_topics),
            ("docs_per_topic", self.docs_per_topic),
            ("relevant_per_topic", self.relevant_per_topic),
            ("vocab_size", self.vocab_size),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be >= 1"));
            }
        }
        if self.relevant_per_topic > self.docs_per_topic {
            problems.push(format!(
                "relevant_per_topic ({}) exceeds docs_per_topic ({})",
                self.relevant_per_topic, self.docs_per_topic
            ));
        }
        if !(0.0..1.0).contains(&self.noise_ratio) {
            problems.push(format!("noise_ratio {} must be in [0, 1)", self.noise_ratio));
        }
        let needed = self.num_topics * LATENT_TERMS + MIN_BACKGROUND;
        if self.vocab_size < needed {
            problems.push(format!(
                "vocab_size {} too small: {} topics need at least {needed} words",
                self.vocab_size, self.num_topics
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::validation("synthetic spec", problems.join("; ")))
        }
    }
}

/// The latent terms behind one topic, in rendering order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentTerms {
    pub title: Vec<String>,
    pub description: Vec<String>,
    pub narrative: Vec<String>,
}

impl LatentTerms {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.title.iter().chain(&self.description).chain(&self.narrative)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub documents: Vec<Document>,
    pub topics: Vec<Topic>,
    pub qrels: Qrels,
    pub latent: Vec<LatentTerms>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionPaths {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub qrels: PathBuf,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "dr", "kr", "pl", "st", "tr",
];
const VOWELS: &[&str] = &["a", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "k", "m", "n", "r", "t", "x"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    w
}

/// Pseudo-words that survive analysis unchanged, so the terms written into
/// documents and topics are exactly the indexed terms.
fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Result<Vec<String>> {
    let analyzer = AnalyzerConfig::default();
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(size);
    let mut attempts = 0;
    while words.len() < size {
        attempts += 1;
        if attempts > size * 100 {
            return Err(Error::validation(
                "synthetic spec",
                format!("could only form {} distinct words of the {size} requested", words.len()),
            ));
        }
        let w = pseudo_word(rng);
        if seen.insert(w.clone()) && analyzer.analyze(&w) == [w.as_str()] {
            words.push(w);
        }
    }
    Ok(words)
}

fn list(words: &[String]) -> String {
    match words {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn render_topic(id: String, latent: &LatentTerms) -> Topic {
    let narrative = if latent.narrative.is_empty() {
        String::new()
    } else {
        format!("Both {}.", list(&latent.narrative))
    };
    Topic::new(id, latent.title.join(" ")).with_context(format!("What about {}?", list(&latent.description)), narrative)
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String]) -> &'a str {
    &words[rng.random_range(0..words.len())]
}

fn relevant_doc(rng: &mut ChaCha8Rng, latent: &LatentTerms, background: &[String], noise: f64) -> (String, u32) {
    let all: Vec<String> = latent.all().cloned().collect();
    let mut used: Vec<String> = all
        .iter()
        .filter(|_| rng.random_bool(LATENT_COVERAGE))
        .cloned()
        .collect();
    while used.len() < 2 {
        let w = pick(rng, &all).to_string();
        if !used.contains(&w) {
            used.push(w);
        }
    }
    let grade = if used.len() * 3 >= all.len() * 2 { 2 } else { 1 };
    let len = rng.random_range(DOC_LEN);
    let tokens: Vec<&str> = (0..len)
        .map(|_| {
            if rng.random_bool(noise) {
                pick(rng, background)
            } else {
                pick(rng, &used)
            }
        })
        .collect();
    (tokens.join(" "), grade)
}

fn distractor_doc(rng: &mut ChaCha8Rng, latent: &LatentTerms, background: &[String]) -> String {
    let len = rng.random_range(DOC_LEN);
    let tokens: Vec<&str> = (0..len)
        .map(|_| {
            if rng.random_bool(DISTRACTOR_TITLE_SHARE) {
                pick(rng, &latent.title)
            } else {
                pick(rng, background)
            }
        })
        .collect();
    tokens.join(" ")
}

fn background_doc(rng: &mut ChaCha8Rng, background: &[String]) -> String {
    let len = rng.random_range(DOC_LEN);
    let tokens: Vec<&str> = (0..len).map(|_| pick(rng, background)).collect();
    tokens.join(" ")
}

/// Builds a collection; the same spec always yields the same collection.
///
/// Per topic: `relevant_per_topic` relevant documents graded 1 or 2, up to
/// as many distractors graded 0, and background documents to fill
/// `docs_per_topic`. Document ids are assigned after a seeded shuffle.
pub fn generate_collection(spec: &SynthSpec) -> Result<Collection> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut vocab = vocabulary(&mut rng, spec.vocab_size)?;
    let background = vocab.split_off(spec.num_topics * LATENT_TERMS);

    let mut latent = Vec::with_capacity(spec.num_topics);
    for chunk in vocab.chunks(LATENT_TERMS) {
        let n_title = rng.random_range(2..=3);
        let n_desc = (LATENT_TERMS - n_title) / 2 + 1;
        latent.push(LatentTerms {
            title: chunk[..n_title].to_vec(),
            description: chunk[n_title..n_title + n_desc].to_vec(),
            narrative: chunk[n_title + n_desc..].to_vec(),
        });
    }

    // (topic, grade) per document; None marks unjudged background.
    let mut docs: Vec<(String, Option<(usize, u32)>)> = Vec::with_capacity(spec.num_docs());
    for (t, lt) in latent.iter().enumerate() {
        for _ in 0..spec.relevant_per_topic {
            let (text, grade) = relevant_doc(&mut rng, lt, &background, spec.noise_ratio);
            docs.push((text, Some((t, grade))));
        }
        let distractors = spec
            .relevant_per_topic
            .min(spec.docs_per_topic - spec.relevant_per_topic);
        for _ in 0..distractors {
            docs.push((distractor_doc(&mut rng, lt, &background), Some((t, 0))));
        }
        for _ in spec.relevant_per_topic + distractors..spec.docs_per_topic {
            docs.push((background_doc(&mut rng, &background), None));
        }
    }
    docs.shuffle(&mut rng);

    let width = spec.num_docs().to_string().len();
    let topic_ids: Vec<String> = (1..=spec.num_topics).map(|i| i.to_string()).collect();
    let mut qrels = Qrels::new();
    let mut documents = Vec::with_capacity(docs.len());
    for (i, (text, judgment)) in docs.into_iter().enumerate() {
        let doc_id = format!("d{:0width$}", i + 1);
        if let Some((t, grade)) = judgment {
            qrels.insert(&topic_ids[t], &doc_id, grade);
        }
        documents.push(Document::new(doc_id, text));
    }
    let topics = topic_ids
        .into_iter()
        .zip(&latent)
        .map(|(id, lt)| render_topic(id, lt))
        .collect();
    Ok(Collection {
        documents,
        topics,
        qrels,
        latent,
    })
}

/// Writes `corpus.jsonl`, `topics.txt` (TREC markup) and `qrels.txt` into
/// `dir`.
pub fn write_collection(collection: &Collection, dir: &Path) -> Result<CollectionPaths> {
    let paths = CollectionPaths {
        corpus: dir.join("corpus.jsonl"),
        topics: dir.join("topics.txt"),
        qrels: dir.join("qrels.txt"),
    };
    let mut corpus = String::new();
    for d in &collection.documents {
        corpus.push_str(&serde_json::to_string(d).expect("serializable"));
        corpus.push('\n');
    }
    write_file(&paths.corpus, &corpus)?;
    write_file(&paths.topics, &format_topics(&collection.topics))?;
    write_file(&paths.qrels, &format_qrels(&collection.qrels))?;
    Ok(paths)
}
