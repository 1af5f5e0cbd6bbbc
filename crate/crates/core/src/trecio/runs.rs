use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::{read_file, write_file, ParseMode};
use crate::error::{Error, Result};
use crate::retrieval::{Ranking, ScoredDoc};
use crate::warning::Warning;

/// Renders a score with 6 significant digits, like C's `%g`.
pub fn format_score(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{x:.*}", (5 - exp) as usize);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    }
}

/// Six-column TREC run text: `topic Q0 doc rank score tag`.
pub fn format_run(rankings: &[Ranking], tag: &str) -> Result<String> {
    if tag.is_empty() || tag.contains(char::is_whitespace) {
        return Err(Error::invalid(
            "run tag",
            format!("{tag:?} must be non-empty without whitespace"),
        ));
    }
    let mut out = String::new();
    for r in rankings {
        r.validate()?;
        for (i, e) in r.entries.iter().enumerate() {
            if !e.score.is_finite() {
                return Err(Error::invalid("run", format!("topic {}: non-finite score", r.topic_id)));
            }
            out.push_str(&format!(
                "{} Q0 {} {} {} {tag}\n",
                r.topic_id,
                e.doc_id,
                i + 1,
                format_score(e.score)
            ));
        }
    }
    Ok(out)
}

/// Writes rankings as a run file. Empty rankings produce no lines.
pub fn write_run(rankings: &[Ranking], path: &Path, tag: &str) -> Result<()> {
    write_file(path, &format_run(rankings, tag)?)
}

struct Line {
    rank: u64,
    doc: String,
    score: f64,
    lineno: usize,
}

/// Parses a run. Rankings come back in order of each topic's first line.
///
/// Strict mode requires ranks `1..n` in file order, non-increasing scores
/// and unique documents per topic. Lenient mode re-sorts by score (then
/// rank), drops repeated documents and reports what it changed.
pub fn parse_run(text: &str, mode: ParseMode) -> Result<(Vec<Ranking>, Vec<Warning>)> {
    let mut order: Vec<String> = Vec::new();
    let mut by_topic: HashMap<String, (String, Vec<Line>)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _q0, doc, rank, score, tag] = fields.as_slice() else {
            return Err(Error::parse(
                "run",
                lineno,
                format!("expected 6 columns, found {}", fields.len()),
            ));
        };
        let rank: u64 = rank
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| Error::parse("run", lineno, format!("rank {rank:?} is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse("run", lineno, format!("score {score:?} is not a number")))?;
        let entry = by_topic.entry(topic.to_string()).or_insert_with(|| {
            order.push(topic.to_string());
            (tag.to_string(), Vec::new())
        });
        entry.1.push(Line {
            rank,
            doc: doc.to_string(),
            score,
            lineno,
        });
    }

    let mut rankings = Vec::with_capacity(order.len());
    let mut warnings = Vec::new();
    for topic in order {
        let (tag, mut lines) = by_topic.remove(&topic).expect("recorded topic");
        match mode {
            ParseMode::Strict => check_strict(&topic, &lines)?,
            ParseMode::Lenient => {
                if let Some(message) = repair(&mut lines) {
                    warnings.push(Warning::RunRepaired {
                        topic_id: topic.clone(),
                        message,
                    });
                }
            }
        }
        let entries = lines.into_iter().map(|l| ScoredDoc::new(l.doc, l.score)).collect();
        rankings.push(Ranking::new(topic, tag, entries));
    }
    Ok((rankings, warnings))
}

fn check_strict(topic: &str, lines: &[Line]) -> Result<()> {
    let mut seen = HashSet::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        if l.rank != i as u64 + 1 {
            return Err(Error::validation(
                "run",
                format!(
                    "line {}: topic {topic}: expected rank {}, found {}",
                    l.lineno,
                    i + 1,
                    l.rank
                ),
            ));
        }
        if i > 0 && l.score > lines[i - 1].score {
            return Err(Error::validation(
                "run",
                format!("line {}: topic {topic}: score increases at rank {}", l.lineno, l.rank),
            ));
        }
        if !seen.insert(l.doc.as_str()) {
            return Err(Error::validation(
                "run",
                format!("line {}: topic {topic}: document {} repeated", l.lineno, l.doc),
            ));
        }
    }
    Ok(())
}

fn repair(lines: &mut Vec<Line>) -> Option<String> {
    let mut notes = Vec::new();
    let sorted = lines.windows(2).all(|w| w[0].score >= w[1].score)
        && lines.iter().enumerate().all(|(i, l)| l.rank == i as u64 + 1);
    if !sorted {
        lines.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.rank.cmp(&b.rank)));
        notes.push("re-sorted by score".to_string());
    }
    let before = lines.len();
    let mut seen = HashSet::new();
    lines.retain(|l| seen.insert(l.doc.clone()));
    if lines.len() < before {
        notes.push(format!("dropped {} repeated documents", before - lines.len()));
    }
    (!notes.is_empty()).then(|| notes.join("; "))
}

pub fn read_run(path: &Path, mode: ParseMode) -> Result<(Vec<Ranking>, Vec<Warning>)> {
    parse_run(&read_file(path)?, mode)
}
