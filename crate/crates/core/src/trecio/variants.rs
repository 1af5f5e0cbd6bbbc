//! Query variant datasets.
//!
//! TSV: `topic_id<TAB>rank<TAB>query`, with backslash, tab, CR and LF in
//! queries escaped as `\\`, `\t`, `\r` and `\n`. Provenance is not kept.
//!
//! JSON lines: one object per query with `topic_id`, `rank`, `query` and,
//! when known, `strategy`, `model_id` and `seed`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::querygen::{Provenance, QueryVariantSet, StrategyKind};

fn escape(q: &str) -> String {
    let mut out = String::with_capacity(q.len());
    for c in q.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, lineno: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::parse(
                    "variants",
                    lineno,
                    format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default()),
                ))
            }
        }
    }
    Ok(out)
}

fn check_sets(sets: &[QueryVariantSet]) -> Result<()> {
    for s in sets {
        if let Some(q) = s.queries.iter().find(|q| q.is_empty()) {
            return Err(Error::invalid(
                "variant set",
                format!("topic {}: empty query {q:?}", s.topic_id),
            ));
        }
    }
    Ok(())
}

pub fn format_variants_tsv(sets: &[QueryVariantSet]) -> Result<String> {
    check_sets(sets)?;
    let mut out = String::new();
    for s in sets {
        for (i, q) in s.queries.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", s.topic_id, i + 1, escape(q)));
        }
    }
    Ok(out)
}

pub fn write_variants_tsv(sets: &[QueryVariantSet], path: &Path) -> Result<()> {
    write_file(path, &format_variants_tsv(sets)?)
}

/// Groups `(topic, rank, query)` rows into sets, requiring ranks `1..n` per
/// topic in file order.
struct Grouper {
    sets: Vec<QueryVariantSet>,
}

impl Grouper {
    fn push(
        &mut self,
        lineno: usize,
        topic: &str,
        rank: u64,
        query: String,
        provenance: Option<Provenance>,
    ) -> Result<()> {
        if query.is_empty() {
            return Err(Error::parse("variants", lineno, "empty query"));
        }
        let pos = self.sets.iter().position(|s| s.topic_id == topic);
        let set = match pos {
            Some(p) => &mut self.sets[p],
            None => {
                self.sets.push(QueryVariantSet {
                    topic_id: topic.to_string(),
                    provenance: provenance.clone(),
                    queries: Vec::new(),
                });
                self.sets.last_mut().expect("just pushed")
            }
        };
        let expected = set.queries.len() as u64 + 1;
        if rank != expected {
            return Err(Error::validation(
                "variants",
                format!("line {lineno}: topic {topic}: expected rank {expected}, found {rank}"),
            ));
        }
        if set.provenance != provenance {
            return Err(Error::parse(
                "variants",
                lineno,
                format!("topic {topic}: provenance changes within the topic"),
            ));
        }
        set.queries.push(query);
        Ok(())
    }
}

pub fn parse_variants_tsv(text: &str) -> Result<Vec<QueryVariantSet>> {
    let mut g = Grouper { sets: Vec::new() };
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(topic), Some(rank), Some(query)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse("variants", lineno, "expected 3 tab-separated columns"));
        };
        let rank: u64 = rank
            .parse()
            .map_err(|_| Error::parse("variants", lineno, format!("rank {rank:?} is not an integer")))?;
        g.push(lineno, topic, rank, unescape(query, lineno)?, None)?;
    }
    Ok(g.sets)
}

#[derive(Serialize, Deserialize)]
struct JsonLine {
    topic_id: String,
    rank: u64,
    query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<StrategyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn format_variants_jsonl(sets: &[QueryVariantSet]) -> Result<String> {
    check_sets(sets)?;
    let mut out = String::new();
    for s in sets {
        for (i, q) in s.queries.iter().enumerate() {
            let line = JsonLine {
                topic_id: s.topic_id.clone(),
                rank: i as u64 + 1,
                query: q.clone(),
                strategy: s.provenance.as_ref().map(|p| p.strategy),
                model_id: s.provenance.as_ref().map(|p| p.model_id.clone()),
                seed: s.provenance.as_ref().map(|p| p.seed),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_variants_jsonl(sets: &[QueryVariantSet], path: &Path) -> Result<()> {
    write_file(path, &format_variants_jsonl(sets)?)
}

pub fn parse_variants_jsonl(text: &str) -> Result<Vec<QueryVariantSet>> {
    let mut g = Grouper { sets: Vec::new() };
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let l: JsonLine = serde_json::from_str(line).map_err(|e| Error::parse("variants", lineno, e.to_string()))?;
        let provenance = match (l.strategy, l.model_id, l.seed) {
            (Some(strategy), Some(model_id), Some(seed)) => Some(Provenance {
                strategy,
                model_id,
                seed,
            }),
            (None, None, None) => None,
            _ => {
                return Err(Error::parse(
                    "variants",
                    lineno,
                    "strategy, model_id and seed must appear together",
                ))
            }
        };
        g.push(lineno, &l.topic_id, l.rank, l.query, provenance)?;
    }
    Ok(g.sets)
}

/// Reads a dataset, choosing the format by extension (`.jsonl` or TSV).
pub fn read_variants(path: &Path) -> Result<Vec<QueryVariantSet>> {
    let text = read_file(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        parse_variants_jsonl(&text)
    } else {
        parse_variants_tsv(&text)
    }
}
