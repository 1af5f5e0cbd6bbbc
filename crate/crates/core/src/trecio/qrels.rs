use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::metrics::Qrels;
use crate::warning::Warning;

/// Parses `topic iteration doc grade` lines. A repeated (topic, doc) pair
/// keeps the last grade and yields a warning.
pub fn parse_qrels(text: &str) -> Result<(Qrels, Vec<Warning>)> {
    let mut qrels = Qrels::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _iteration, doc, grade] = fields.as_slice() else {
            return Err(Error::parse(
                "qrels",
                lineno,
                format!("expected 4 columns, found {}", fields.len()),
            ));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| Error::parse("qrels", lineno, format!("grade {grade:?} is not an integer")))?;
        let grade = u32::try_from(grade)
            .map_err(|_| Error::parse("qrels", lineno, format!("grade {grade} out of range (must be >= 0)")))?;
        if qrels.insert(topic, doc, grade).is_some() {
            warnings.push(Warning::DuplicateJudgment {
                topic_id: topic.to_string(),
                doc_id: doc.to_string(),
                line: lineno,
            });
        }
    }
    Ok((qrels, warnings))
}

pub fn read_qrels(path: &Path) -> Result<(Qrels, Vec<Warning>)> {
    parse_qrels(&read_file(path)?)
}

/// Writes judgments sorted by topic, then doc id.
pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (topic, judged) in qrels.topics() {
        let mut docs: Vec<(&String, &u32)> = judged.iter().collect();
        docs.sort();
        for (doc, grade) in docs {
            out.push_str(&format!("{topic} 0 {doc} {grade}\n"));
        }
    }
    out
}

pub fn write_qrels(qrels: &Qrels, path: &Path) -> Result<()> {
    write_file(path, &format_qrels(qrels))
}
