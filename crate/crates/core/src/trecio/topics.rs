use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::querygen::Topic;

fn tag_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<(/?)(top|num|title|desc|narr)>").expect("valid regex"))
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_label(s: &str, label: &str) -> String {
    let s = normalize(s);
    match s.get(..label.len()) {
        Some(head) if head.eq_ignore_ascii_case(label) => s[label.len()..].trim().to_string(),
        _ => s,
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].matches('\n').count() + 1
}

#[derive(Default)]
struct Block {
    start_line: usize,
    num: Option<String>,
    title: Option<String>,
    desc: Option<String>,
    narr: Option<String>,
}

impl Block {
    fn set(&mut self, field: &str, content: String) {
        match field {
            "num" => self.num = Some(content),
            "title" => self.title = Some(content),
            "desc" => self.desc = Some(content),
            "narr" => self.narr = Some(content),
            _ => {}
        }
    }

    fn finish(self, index: usize) -> Result<Topic> {
        let num = self.num.map(|n| strip_label(&n, "Number:")).filter(|n| !n.is_empty());
        let Some(topic_id) = num else {
            return Err(Error::parse(
                "topics",
                self.start_line,
                format!("topic block {index} has no <num>"),
            ));
        };
        let title = self.title.map(|t| normalize(&t)).filter(|t| !t.is_empty());
        let Some(title) = title else {
            return Err(Error::parse(
                "topics",
                self.start_line,
                format!("topic {topic_id} has no <title>"),
            ));
        };
        Ok(Topic {
            topic_id,
            title,
            description: self.desc.map(|d| strip_label(&d, "Description:")).unwrap_or_default(),
            narrative: self.narr.map(|n| strip_label(&n, "Narrative:")).unwrap_or_default(),
        })
    }
}

fn parse_markup(text: &str) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    let mut current: Option<Block> = None;
    // Field whose content runs until the next tag.
    let mut open: Option<(String, usize)> = None;

    for cap in tag_pattern().captures_iter(text) {
        let whole = cap.get(0).expect("match");
        let closing = !cap[1].is_empty();
        let name = cap[2].to_ascii_lowercase();
        let content_end = whole.start();

        if let (Some((field, start)), Some(block)) = (open.take(), current.as_mut()) {
            block.set(&field, text[start..content_end].to_string());
        }

        match (name.as_str(), closing) {
            ("top", false) => {
                if let Some(block) = current.take() {
                    topics.push(block.finish(topics.len() + 1)?);
                }
                current = Some(Block {
                    start_line: line_of(text, whole.start()),
                    ..Block::default()
                });
            }
            ("top", true) => {
                let block = current
                    .take()
                    .ok_or_else(|| Error::parse("topics", line_of(text, whole.start()), "</top> without <top>"))?;
                topics.push(block.finish(topics.len() + 1)?);
            }
            (_, true) => {}
            (field, false) => {
                if current.is_none() {
                    return Err(Error::parse(
                        "topics",
                        line_of(text, whole.start()),
                        format!("<{field}> outside a <top> block"),
                    ));
                }
                open = Some((field.to_string(), whole.end()));
            }
        }
    }
    if let (Some((field, start)), Some(block)) = (open.take(), current.as_mut()) {
        block.set(&field, text[start..].to_string());
    }
    if let Some(block) = current.take() {
        topics.push(block.finish(topics.len() + 1)?);
    }
    Ok(topics)
}

fn parse_jsonl(text: &str) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: Topic = serde_json::from_str(line).map_err(|e| Error::parse("topics", i + 1, e.to_string()))?;
        let topic = Topic {
            topic_id: normalize(&raw.topic_id),
            title: normalize(&raw.title),
            description: normalize(&raw.description),
            narrative: normalize(&raw.narrative),
        };
        if topic.topic_id.is_empty() || topic.title.is_empty() {
            return Err(Error::parse("topics", i + 1, "topic_id and title must be non-empty"));
        }
        topics.push(topic);
    }
    Ok(topics)
}

/// Parses TREC topic markup or JSON lines (detected by a leading `{`).
pub fn parse_topics(text: &str) -> Result<Vec<Topic>> {
    if text.trim_start().starts_with('{') {
        parse_jsonl(text)
    } else {
        parse_markup(text)
    }
}

pub fn read_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(&read_file(path)?)
}

/// Renders topics in TREC markup.
pub fn format_topics(topics: &[Topic]) -> String {
    let mut out = String::new();
    for t in topics {
        out.push_str("<top>\n");
        out.push_str(&format!("<num> Number: {}\n", t.topic_id));
        out.push_str(&format!("<title> {}\n\n", t.title));
        out.push_str(&format!("<desc> Description:\n{}\n\n", t.description));
        out.push_str(&format!("<narr> Narrative:\n{}\n\n", t.narrative));
        out.push_str("</top>\n\n");
    }
    out
}

pub fn write_topics(topics: &[Topic], path: &Path) -> Result<()> {
    write_file(path, &format_topics(topics))
}

pub fn write_topics_jsonl(topics: &[Topic], path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in topics {
        out.push_str(&serde_json::to_string(t).expect("serializable"));
        out.push('\n');
    }
    write_file(path, &out)
}
