use std::fmt::Write as _;

use serde::Serialize;

use super::MetricReport;

/// All metric reports for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub run: String,
    pub metrics: Vec<MetricReport>,
}

/// Aligned text table: one row per run, one column per metric. A cell gets
/// the marker of every baseline it beats significantly; markers are letters
/// assigned to `baselines` in order (`a`, `b`, ...).
pub fn render_table(runs: &[RunReport], baselines: &[String]) -> String {
    let metric_names: Vec<&str> = runs
        .first()
        .map(|r| r.metrics.iter().map(|m| m.metric.as_str()).collect())
        .unwrap_or_default();
    let marker = |baseline: &str| {
        baselines
            .iter()
            .position(|b| b == baseline)
            .map(|i| char::from(b'a' + i as u8))
    };

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(runs.len() + 1);
    let mut header = vec!["run".to_string()];
    header.extend(metric_names.iter().map(|s| s.to_string()));
    rows.push(header);
    for run in runs {
        let mut row = vec![run.run.clone()];
        for m in &run.metrics {
            let mut cell = format!("{:.4}", m.aggregate);
            for s in m.significance.iter().filter(|s| s.significant) {
                if let Some(c) = marker(&s.baseline) {
                    cell.push(c);
                }
            }
            row.push(cell);
        }
        rows.push(row);
    }

    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<width$}", width = widths[c]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if !baselines.is_empty() {
        out.push('\n');
        for (i, b) in baselines.iter().enumerate() {
            let _ = writeln!(out, "{}: significantly better than {b}", char::from(b'a' + i as u8));
        }
    }
    out
}

#[derive(Serialize)]
struct Line<'a> {
    run: &'a str,
    metric: &'a str,
    topic: &'a str,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    significance: Option<&'a [super::Significance]>,
}

/// One JSON object per (run, metric, topic), followed by an `all` line with
/// the aggregate and any significance results.
pub fn render_jsonl(runs: &[RunReport]) -> String {
    let mut out = String::new();
    for run in runs {
        for m in &run.metrics {
            for (topic, value) in &m.per_topic {
                let line = Line {
                    run: &run.run,
                    metric: &m.metric,
                    topic,
                    value: *value,
                    significance: None,
                };
                out.push_str(&serde_json::to_string(&line).expect("serializable"));
                out.push('\n');
            }
            let line = Line {
                run: &run.run,
                metric: &m.metric,
                topic: "all",
                value: m.aggregate,
                significance: (!m.significance.is_empty()).then_some(m.significance.as_slice()),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Significance;

    fn report(run: &str, value: f64, sig: Vec<Significance>) -> RunReport {
        RunReport {
            run: run.into(),
            metrics: vec![MetricReport {
                metric: "P@10".into(),
                per_topic: [("301".to_string(), value)].into(),
                aggregate: value,
                significance: sig,
            }],
        }
    }

    #[test]
    fn table_marks_significant_wins() {
        let sig = vec![
            Significance {
                baseline: "bm25".into(),
                test: "paired t-test".into(),
                t_statistic: 4.0,
                p_value: 0.01,
                significant: true,
            },
            Significance {
                baseline: "bm25-rm3".into(),
                test: "paired t-test".into(),
                t_statistic: 1.0,
                p_value: 0.3,
                significant: false,
            },
        ];
        let table = render_table(
            &[report("bm25", 0.25, vec![]), report("P2-rrf60-m10", 0.5, sig)],
            &["bm25".into(), "bm25-rm3".into()],
        );
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "run           P@10");
        assert_eq!(lines[1], "bm25          0.2500");
        assert_eq!(lines[2], "P2-rrf60-m10  0.5000a");
        assert!(table.contains("b: significantly better than bm25-rm3"));
    }

    #[test]
    fn jsonl_has_topic_and_aggregate_lines() {
        let out = render_jsonl(&[report("bm25", 0.25, vec![])]);
        let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["topic"], "301");
        assert_eq!(lines[1]["topic"], "all");
        assert_eq!(lines[1]["value"], 0.25);
    }
}
