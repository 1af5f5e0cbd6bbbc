//! Prompt construction, model calls and reply parsing for synthetic query
//! variants.
//!
//! Three prompt strategies are supported. All of them state the generator
//! role, ask for `n` keyword queries about the topic title and fix the reply
//! format. `P2` adds the topic description and narrative, `P3` adds example
//! queries written for other topics.

mod client;
mod stub;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warning::Warning;

pub use client::{CachedBackend, ClientConfig, OpenAiClient, ResponseCache, RetryPolicy};
pub use stub::{stub_generate, StubBackend};

/// A structured information need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub narrative: String,
}

impl Topic {
    pub fn new(topic_id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            topic_id: topic_id.into(),
            title: title.into(),
            description: String::new(),
            narrative: String::new(),
        }
    }

    pub fn with_context(mut self, description: impl Into<String>, narrative: impl Into<String>) -> Self {
        self.description = description.into();
        self.narrative = narrative.into();
        self
    }
}

/// Example queries for one (other) topic, shown to the model by `P3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub title: String,
    pub queries: Vec<String>,
}

/// The bundled `P3` examples, one JSON object per line.
pub const DEFAULT_EXAMPLES: &str = include_str!("../../data/p3_examples.jsonl");

pub fn parse_examples(text: &str) -> Result<Vec<PromptExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse("prompt examples", i + 1, e.to_string())))
        .collect()
}

pub fn load_examples(path: &Path) -> Result<Vec<PromptExample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_examples(&text)
}

pub fn default_examples() -> Vec<PromptExample> {
    parse_examples(DEFAULT_EXAMPLES).expect("bundled examples parse")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    P1,
    P2,
    P3,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::P1 => "P1",
            StrategyKind::P2 => "P2",
            StrategyKind::P3 => "P3",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "P1" => Ok(StrategyKind::P1),
            "P2" => Ok(StrategyKind::P2),
            "P3" => Ok(StrategyKind::P3),
            _ => Err(Error::invalid(
                "prompt strategy",
                format!("{s:?} (expected P1, P2 or P3)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptStrategy {
    /// Title only.
    P1,
    /// Title, description and narrative.
    P2,
    /// Title plus example queries for other topics.
    P3 { examples: Vec<PromptExample> },
}

impl PromptStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            PromptStrategy::P1 => StrategyKind::P1,
            PromptStrategy::P2 => StrategyKind::P2,
            PromptStrategy::P3 { .. } => StrategyKind::P3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PromptStrategy::P3 { examples } = self {
            if examples.is_empty() || examples.iter().any(|e| e.queries.is_empty()) {
                return Err(Error::invalid(
                    "prompt strategy",
                    "P3 needs at least one example, each with at least one query",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub seed: u64,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            seed: 42,
        }
    }
}

/// Whether the role sentence is sent as its own system message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLayout {
    #[default]
    SingleUser,
    SystemRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub messages: Vec<Message>,
    pub decoding: Decoding,
    pub max_queries: usize,
}

impl Prompt {
    /// All message contents joined by blank lines.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptOptions {
    pub n: usize,
    pub decoding: Decoding,
    pub layout: PromptLayout,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            n: 100,
            decoding: Decoding::default(),
            layout: PromptLayout::SingleUser,
        }
    }
}

pub const ROLE_SENTENCE: &str = "You are a generator of search query variants.";
pub const FORMAT_SENTENCE: &str = "Your reply is a numbered list of search queries.";
const EXAMPLE_PREFIX: &str = "Example queries for the topic about ";

fn count_phrase(n: usize) -> String {
    if n == 100 {
        "one hundred".to_string()
    } else {
        n.to_string()
    }
}

fn example_block(examples: &[PromptExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{EXAMPLE_PREFIX}{} include {}.", e.title, e.queries.join(", ")))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_prompt(topic: &Topic, strategy: &PromptStrategy, n: usize) -> Result<Prompt> {
    build_prompt_with(
        topic,
        strategy,
        &PromptOptions {
            n,
            ..PromptOptions::default()
        },
    )
}

pub fn build_prompt_with(topic: &Topic, strategy: &PromptStrategy, options: &PromptOptions) -> Result<Prompt> {
    strategy.validate()?;
    if topic.title.trim().is_empty() {
        return Err(Error::invalid(
            "topic",
            format!("topic {} has an empty title", topic.topic_id),
        ));
    }
    if options.n == 0 {
        return Err(Error::invalid("prompt", "number of queries must be >= 1"));
    }
    let mut blocks = vec![format!(
        "Generate {} keyword queries about {}.",
        count_phrase(options.n),
        topic.title
    )];
    match strategy {
        PromptStrategy::P1 => {}
        PromptStrategy::P2 => {
            let context = format!("{} {}", topic.description, topic.narrative);
            let context = context.trim();
            if !context.is_empty() {
                blocks.push(context.to_string());
            }
        }
        PromptStrategy::P3 { examples } => blocks.push(example_block(examples)),
    }
    blocks.push(FORMAT_SENTENCE.to_string());

    let messages = match options.layout {
        PromptLayout::SingleUser => {
            let mut all = vec![ROLE_SENTENCE.to_string()];
            all.extend(blocks);
            vec![Message {
                role: Role::User,
                content: all.join("\n\n"),
            }]
        }
        PromptLayout::SystemRole => vec![
            Message {
                role: Role::System,
                content: ROLE_SENTENCE.to_string(),
            },
            Message {
                role: Role::User,
                content: blocks.join("\n\n"),
            },
        ],
    };
    Ok(Prompt {
        messages,
        decoding: options.decoding,
        max_queries: options.n,
    })
}

fn list_item_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+\s*[.)]\s*(.*)$").expect("valid regex"))
}

fn strip_quotes(s: &str) -> &str {
    const QUOTES: &[char] = &['"', '\'', '`', '“', '”', '‘', '’'];
    s.trim().trim_matches(QUOTES).trim()
}

/// Extracts the items of a numbered list (`1.` or `1)` prefixes) in order.
/// Other lines are ignored. Duplicates are kept.
pub fn parse_numbered_list(text: &str) -> Result<Vec<String>> {
    let items: Vec<String> = text
        .lines()
        .filter_map(|line| list_item_pattern().captures(line))
        .map(|c| strip_quotes(c.get(1).map_or("", |m| m.as_str())).to_string())
        .filter(|q| !q.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::EmptyReply { raw: text.to_string() });
    }
    Ok(items)
}

pub fn render_numbered_list(queries: &[String]) -> String {
    let mut out = String::new();
    for (i, q) in queries.iter().enumerate() {
        out.push_str(&format!("{}. {q}\n", i + 1));
    }
    out
}

/// Where a variant set came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: StrategyKind,
    pub model_id: String,
    pub seed: u64,
}

/// Generated queries for one topic in generation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryVariantSet {
    pub topic_id: String,
    pub provenance: Option<Provenance>,
    pub queries: Vec<String>,
}

/// Anything that answers a prompt with text.
pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &Prompt) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub set: QueryVariantSet,
    pub warning: Option<Warning>,
}

pub fn generate_variants(
    backend: &dyn ChatBackend,
    topic: &Topic,
    strategy: &PromptStrategy,
    n: usize,
) -> Result<Generated> {
    generate_variants_with(
        backend,
        topic,
        strategy,
        &PromptOptions {
            n,
            ..PromptOptions::default()
        },
    )
}

/// Prompts the backend and parses its reply. Replies with more than `n`
/// items are cut to the first `n`; shorter replies are returned as they are
/// with a shortfall warning.
pub fn generate_variants_with(
    backend: &dyn ChatBackend,
    topic: &Topic,
    strategy: &PromptStrategy,
    options: &PromptOptions,
) -> Result<Generated> {
    let prompt = build_prompt_with(topic, strategy, options)?;
    let reply = backend.complete(&prompt)?;
    let mut queries = parse_numbered_list(&reply)?;
    queries.truncate(options.n);
    let warning = (queries.len() < options.n).then(|| Warning::Shortfall {
        topic_id: topic.topic_id.clone(),
        requested: options.n,
        parsed: queries.len(),
    });
    Ok(Generated {
        set: QueryVariantSet {
            topic_id: topic.topic_id.clone(),
            provenance: Some(Provenance {
                strategy: strategy.kind(),
                model_id: backend.model_id().to_string(),
                seed: options.decoding.seed,
            }),
            queries,
        },
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topic() -> Topic {
        Topic::new("301", "International Organized Crime").with_context(
            "Identify organizations that participate in international criminal activity.",
            "A relevant document must name the organization.",
        )
    }

    fn p3() -> PromptStrategy {
        PromptStrategy::P3 {
            examples: vec![PromptExample {
                title: "solar panels".into(),
                queries: vec!["solar panel cost".into(), "photovoltaic roof".into()],
            }],
        }
    }

    #[test]
    fn p1_golden() {
        let p = build_prompt(&topic(), &PromptStrategy::P1, 100).unwrap();
        assert_eq!(p.messages.len(), 1);
        assert_eq!(p.messages[0].role, Role::User);
        assert_eq!(
            p.messages[0].content,
            "You are a generator of search query variants.\n\n\
             Generate one hundred keyword queries about International Organized Crime.\n\n\
             Your reply is a numbered list of search queries."
        );
        assert_eq!(p.decoding.temperature, 0.0);
        assert_eq!(p.decoding.seed, 42);
        assert_eq!(p.max_queries, 100);
    }

    #[test]
    fn p2_golden() {
        let p = build_prompt(&topic(), &PromptStrategy::P2, 100).unwrap();
        assert_eq!(
            p.messages[0].content,
            "You are a generator of search query variants.\n\n\
             Generate one hundred keyword queries about International Organized Crime.\n\n\
             Identify organizations that participate in international criminal activity. \
             A relevant document must name the organization.\n\n\
             Your reply is a numbered list of search queries."
        );
    }

    #[test]
    fn p3_golden() {
        let p = build_prompt(&topic(), &p3(), 100).unwrap();
        assert_eq!(
            p.messages[0].content,
            "You are a generator of search query variants.\n\n\
             Generate one hundred keyword queries about International Organized Crime.\n\n\
             Example queries for the topic about solar panels include solar panel cost, photovoltaic roof.\n\n\
             Your reply is a numbered list of search queries."
        );
        assert!(!p.messages[0].content.contains("Identify organizations"));
    }

    #[test]
    fn counts_other_than_one_hundred_use_digits() {
        let p = build_prompt(&topic(), &PromptStrategy::P1, 10).unwrap();
        assert!(p.messages[0].content.contains("Generate 10 keyword queries about"));
        assert_eq!(p.max_queries, 10);
    }

    #[test]
    fn system_role_layout_splits_the_role_sentence() {
        let options = PromptOptions {
            layout: PromptLayout::SystemRole,
            ..PromptOptions::default()
        };
        let single = build_prompt(&topic(), &PromptStrategy::P2, 100).unwrap();
        let split = build_prompt_with(&topic(), &PromptStrategy::P2, &options).unwrap();
        assert_eq!(split.messages.len(), 2);
        assert_eq!(split.messages[0].role, Role::System);
        assert_eq!(split.messages[0].content, ROLE_SENTENCE);
        assert_eq!(split.text(), single.text());
    }

    #[test]
    fn p3_without_examples_is_a_configuration_error() {
        let empty = PromptStrategy::P3 { examples: vec![] };
        assert!(build_prompt(&topic(), &empty, 100).is_err());
        let no_queries = PromptStrategy::P3 {
            examples: vec![PromptExample {
                title: "x".into(),
                queries: vec![],
            }],
        };
        assert!(build_prompt(&topic(), &no_queries, 100).is_err());
    }

    #[test]
    fn bundled_examples_are_usable() {
        let examples = default_examples();
        assert!(!examples.is_empty());
        assert!(PromptStrategy::P3 { examples }.validate().is_ok());
    }

    #[test]
    fn parse_plain_list() {
        assert_eq!(
            parse_numbered_list("1. airbus subsidies\n2. eu aircraft aid").unwrap(),
            vec!["airbus subsidies", "eu aircraft aid"]
        );
    }

    #[test]
    fn parse_prefix_and_quote_variants() {
        assert_eq!(
            parse_numbered_list("Intro line\n1) \"a\"\n2) b").unwrap(),
            vec!["a", "b"]
        );
        assert_eq!(
            parse_numbered_list("Here you go:\r\n 10.  'x y'  \r\n\r\n11 ) z\nThanks").unwrap(),
            vec!["x y", "z"]
        );
        assert_eq!(parse_numbered_list("1. a\n2. a").unwrap(), vec!["a", "a"]);
    }

    #[test]
    fn parse_failure_keeps_raw_text() {
        assert!(matches!(parse_numbered_list(""), Err(Error::EmptyReply { .. })));
        match parse_numbered_list("no list here") {
            Err(Error::EmptyReply { raw }) => assert_eq!(raw, "no list here"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strategy_names() {
        assert_eq!("p-2".parse::<StrategyKind>().unwrap(), StrategyKind::P2);
        assert_eq!("P3".parse::<StrategyKind>().unwrap(), StrategyKind::P3);
        assert!("p4".parse::<StrategyKind>().is_err());
    }

    struct Canned(String);

    impl ChatBackend for Canned {
        fn model_id(&self) -> &str {
            "canned"
        }

        fn complete(&self, _: &Prompt) -> Result<String> {
            Ok(self.0.clone())
        }
    }

    fn numbered(n: usize) -> String {
        render_numbered_list(&(1..=n).map(|i| format!("query {i}")).collect::<Vec<_>>())
    }

    #[test]
    fn full_reply_keeps_order_and_provenance() {
        let g = generate_variants(&Canned(numbered(100)), &topic(), &PromptStrategy::P2, 100).unwrap();
        assert!(g.warning.is_none());
        assert_eq!(g.set.queries.len(), 100);
        assert_eq!(g.set.queries[0], "query 1");
        assert_eq!(g.set.queries[99], "query 100");
        let prov = g.set.provenance.unwrap();
        assert_eq!(prov.strategy, StrategyKind::P2);
        assert_eq!(prov.model_id, "canned");
        assert_eq!(prov.seed, 42);
    }

    #[test]
    fn short_reply_is_not_padded() {
        let g = generate_variants(&Canned(numbered(97)), &topic(), &PromptStrategy::P1, 100).unwrap();
        assert_eq!(g.set.queries.len(), 97);
        assert_eq!(
            g.warning,
            Some(Warning::Shortfall {
                topic_id: "301".into(),
                requested: 100,
                parsed: 97
            })
        );
    }

    #[test]
    fn unparseable_reply_propagates() {
        let err = generate_variants(&Canned("Sorry.".into()), &topic(), &PromptStrategy::P1, 10).unwrap_err();
        assert!(matches!(err, Error::EmptyReply { .. }));
    }
}
