//! Offline query generator for tests and CI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{render_numbered_list, ChatBackend, Prompt, Topic, EXAMPLE_PREFIX, FORMAT_SENTENCE, ROLE_SENTENCE};
use crate::analyzer::AnalyzerConfig;
use crate::error::{Error, Result};

const TITLE_WEIGHT: f64 = 3.0;
const CONTEXT_WEIGHT: f64 = 1.0;
const MIN_TERMS: usize = 2;
const MAX_TERMS: usize = 5;

fn unique_terms(analyzer: &AnalyzerConfig, text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in analyzer.analyze(text) {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn topic_seed(topic: &Topic, seed: u64) -> u64 {
    let mut h = Sha256::new();
    for part in [&topic.title, &topic.description, &topic.narrative] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Deterministic pseudo-queries: each is a weighted sample, without
/// replacement, of 2 to 5 analyzed terms from the title and description.
/// Title terms are three times as likely as description terms. Query `i`
/// does not depend on `n`, so shorter lists are prefixes of longer ones.
pub fn stub_generate(topic: &Topic, seed: u64, n: usize) -> Result<Vec<String>> {
    if n == 0 {
        return Err(Error::invalid("stub generator", "n must be >= 1"));
    }
    let analyzer = AnalyzerConfig::default();
    let title_terms = unique_terms(&analyzer, &topic.title);
    if title_terms.is_empty() {
        return Err(Error::invalid(
            "stub generator",
            format!("topic {} has no title terms after analysis", topic.topic_id),
        ));
    }
    let mut pool: Vec<(String, f64)> = title_terms.iter().map(|t| (t.clone(), TITLE_WEIGHT)).collect();
    for t in unique_terms(&analyzer, &topic.description) {
        if !title_terms.contains(&t) {
            pool.push((t, CONTEXT_WEIGHT));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(topic_seed(topic, seed));
    let mut queries = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.random_range(MIN_TERMS..=MAX_TERMS).min(pool.len());
        let mut remaining = pool.clone();
        let mut picked = Vec::with_capacity(len);
        for _ in 0..len {
            let total: f64 = remaining.iter().map(|(_, w)| w).sum();
            let mut target = rng.random::<f64>() * total;
            let mut chosen = remaining.len() - 1;
            for (i, (_, w)) in remaining.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            picked.push(remaining.remove(chosen).0);
        }
        queries.push(picked.join(" "));
    }
    Ok(queries)
}

/// A [`ChatBackend`] that reads the topic back out of the prompt and
/// answers with [`stub_generate`] output as a numbered list.
///
/// Only the title and the description/narrative block are visible to it;
/// example queries in the prompt are ignored.
#[derive(Debug, Clone, Default)]
pub struct StubBackend;

pub const STUB_MODEL_ID: &str = "stub";

impl StubBackend {
    fn topic_from_prompt(prompt: &Prompt) -> Result<(Topic, usize)> {
        let text = prompt.text();
        let mut title = None;
        let mut context = Vec::new();
        for block in text.split("\n\n") {
            if block == ROLE_SENTENCE || block == FORMAT_SENTENCE || block.starts_with(EXAMPLE_PREFIX) {
                continue;
            }
            if let Some(rest) = block.strip_prefix("Generate ") {
                if let Some((_, t)) = rest.split_once(" keyword queries about ") {
                    title = Some(t.strip_suffix('.').unwrap_or(t).to_string());
                    continue;
                }
            }
            context.push(block);
        }
        let title = title.ok_or_else(|| Error::invalid("stub prompt", "no title line in prompt"))?;
        let topic = Topic::new("", title).with_context(context.join(" "), "");
        Ok((topic, prompt.max_queries))
    }
}

impl ChatBackend for StubBackend {
    fn model_id(&self) -> &str {
        STUB_MODEL_ID
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let (topic, n) = Self::topic_from_prompt(prompt)?;
        Ok(render_numbered_list(&stub_generate(&topic, prompt.decoding.seed, n)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygen::{build_prompt, generate_variants, parse_numbered_list, PromptExample, PromptStrategy};

    fn topic() -> Topic {
        Topic::new("301", "International Organized Crime").with_context(
            "Identify organizations that participate in international criminal activity.",
            "A relevant document must name the organization.",
        )
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            stub_generate(&topic(), 7, 20).unwrap(),
            stub_generate(&topic(), 7, 20).unwrap()
        );
    }

    #[test]
    fn seeds_change_output() {
        let a = stub_generate(&topic(), 1, 3).unwrap();
        let b = stub_generate(&topic(), 2, 3).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn golden_output() {
        let t = Topic::new("1", "airbus subsidies").with_context("government aid to the aircraft industry", "");
        assert_eq!(
            stub_generate(&t, 1, 3).unwrap(),
            vec!["airbu subsidi aid govern", "airbu subsidi", "subsidi airbu industri"]
        );
    }

    #[test]
    fn shorter_lists_are_prefixes() {
        let long = stub_generate(&topic(), 3, 50).unwrap();
        let short = stub_generate(&topic(), 3, 10).unwrap();
        assert_eq!(&long[..10], short.as_slice());
    }

    #[test]
    fn queries_are_short_and_non_empty() {
        for q in stub_generate(&topic(), 11, 200).unwrap() {
            let n = q.split(' ').count();
            assert!(!q.is_empty() && n <= MAX_TERMS, "{q:?}");
        }
    }

    #[test]
    fn title_only_topic_uses_title_terms() {
        let t = Topic::new("1", "airbus subsidies");
        for q in stub_generate(&t, 5, 20).unwrap() {
            for term in q.split(' ') {
                assert!(term == "airbu" || term == "subsidi", "{term}");
            }
        }
    }

    #[test]
    fn empty_title_is_an_error() {
        assert!(stub_generate(&Topic::new("1", "the of"), 1, 3).is_err());
        assert!(stub_generate(&topic(), 1, 0).is_err());
    }

    #[test]
    fn backend_answers_with_n_queries() {
        let g = generate_variants(&StubBackend, &topic(), &PromptStrategy::P2, 10).unwrap();
        assert_eq!(g.set.queries.len(), 10);
        assert!(g.warning.is_none());
        let expected = stub_generate(
            &Topic::new("", &topic().title).with_context(format!("{} {}", topic().description, topic().narrative), ""),
            42,
            10,
        )
        .unwrap();
        assert_eq!(g.set.queries, expected);
    }

    #[test]
    fn backend_sees_only_the_title_for_p1_and_p3() {
        let p1 = generate_variants(&StubBackend, &topic(), &PromptStrategy::P1, 10).unwrap();
        let expected = stub_generate(&Topic::new("", &topic().title), 42, 10).unwrap();
        assert_eq!(p1.set.queries, expected);
        let p3 = PromptStrategy::P3 {
            examples: vec![PromptExample {
                title: "x".into(),
                queries: vec!["y".into()],
            }],
        };
        let g = generate_variants(&StubBackend, &topic(), &p3, 10).unwrap();
        assert_eq!(g.set.queries, expected);
    }

    #[test]
    fn rendered_list_round_trips() {
        let qs = stub_generate(&topic(), 9, 30).unwrap();
        assert_eq!(parse_numbered_list(&render_numbered_list(&qs)).unwrap(), qs);
        let prompt = build_prompt(&topic(), &PromptStrategy::P2, 30).unwrap();
        assert_eq!(
            parse_numbered_list(&StubBackend.complete(&prompt).unwrap())
                .unwrap()
                .len(),
            30
        );
    }
}
