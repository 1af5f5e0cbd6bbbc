use std::fmt;

/// Non-fatal conditions surfaced to callers alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The query analyzed to zero terms; the ranking is empty by construction.
    EmptyQuery { query: String },
    /// RM3 had no feedback documents and fell back to the original query.
    NoFeedbackDocuments { query: String },
    /// The model returned fewer queries than requested.
    Shortfall {
        topic_id: String,
        requested: usize,
        parsed: usize,
    },
    /// A qrels line repeated a (topic, doc) pair; the later grade wins.
    DuplicateJudgment {
        topic_id: String,
        doc_id: String,
        line: usize,
    },
    /// A topic was left out of a metric aggregate.
    SkippedTopic { topic_id: String, reason: String },
    /// A run file violated ranking invariants and was repaired (lenient mode).
    RunRepaired { topic_id: String, message: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::EmptyQuery { query } => write!(f, "query {query:?} has no terms after analysis"),
            Warning::NoFeedbackDocuments { query } => {
                write!(f, "no feedback documents for {query:?}; query not expanded")
            }
            Warning::Shortfall {
                topic_id,
                requested,
                parsed,
            } => write!(f, "topic {topic_id}: requested {requested} queries, got {parsed}"),
            Warning::DuplicateJudgment { topic_id, doc_id, line } => write!(
                f,
                "duplicate judgment for ({topic_id}, {doc_id}) at line {line}; keeping the last"
            ),
            Warning::SkippedTopic { topic_id, reason } => write!(f, "topic {topic_id} skipped: {reason}"),
            Warning::RunRepaired { topic_id, message } => write!(f, "topic {topic_id}: {message}"),
        }
    }
}

/// Logs each warning at `warn` level.
pub fn log_all(warnings: &[Warning]) {
    for w in warnings {
        log::warn!("{w}");
    }
}
