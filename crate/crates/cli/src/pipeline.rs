//! The experiment stages. Each reads its inputs from the configuration and
//! the output directory, writes only into the output directory and skips
//! itself when all of its outputs already exist (unless forced).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use varfuse_core::fusion::fuse_first_m;
use varfuse_core::index::{build, read_corpus, Index};
use varfuse_core::metrics::{
    evaluate, paired_test, per_topic, render_jsonl, render_table, Metric, Qrels, RunReport, Significance,
};
use varfuse_core::querygen::{
    default_examples, generate_variants_with, load_examples, CachedBackend, ChatBackend, OpenAiClient, PromptStrategy,
    QueryVariantSet, ResponseCache, StrategyKind, StubBackend, Topic,
};
use varfuse_core::retrieval::{rm3_expand, search, search_weighted, Ranking};
use varfuse_core::trecio::{
    format_run, format_variants_jsonl, format_variants_tsv, read_qrels, read_run, read_topics, read_variants, ParseMode,
};
use varfuse_core::warning::{log_all, Warning};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::layout::{fused_tag, variant_tag, write_atomic, Layout, BM25_TAG, RM3_TAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Index,
    Generate,
    Retrieve,
    Fuse,
    Evaluate,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Index,
        Stage::Generate,
        Stage::Retrieve,
        Stage::Fuse,
        Stage::Evaluate,
        Stage::Analyze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Index => "index",
            Stage::Generate => "generate",
            Stage::Retrieve => "retrieve",
            Stage::Fuse => "fuse",
            Stage::Evaluate => "evaluate",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Rerun stages even when their outputs exist.
    pub force: bool,
}

/// Validated configuration plus the thread pool for per-topic work.
pub struct Context {
    pub config: ExperimentConfig,
    pub layout: Layout,
    pub options: RunOptions,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: ExperimentConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| CliError::Config(vec![format!("cannot start {} workers: {e}", config.workers)]))?;
        Ok(Self {
            layout: Layout::new(&config.output),
            config,
            options,
            pool,
        })
    }

    fn skip(&self, stage: Stage, outputs: &[PathBuf]) -> bool {
        let done = !self.options.force && !outputs.is_empty() && outputs.iter().all(|p| p.is_file());
        if done {
            info!("{stage}: outputs present, skipping");
        }
        done
    }

    fn topics(&self) -> Result<Vec<Topic>> {
        Ok(read_topics(&self.config.topics)?)
    }

    fn qrels(&self) -> Result<Qrels> {
        let (qrels, warnings) = read_qrels(&self.config.qrels)?;
        log_all(&warnings);
        Ok(qrels)
    }
}

fn require(stage: Stage, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingStage {
            stage: stage.name(),
            path: path.to_path_buf(),
        })
    }
}

fn load_run(stage: Stage, path: &Path) -> Result<Vec<Ranking>> {
    require(stage, path)?;
    let (run, warnings) = read_run(path, ParseMode::Strict)?;
    log_all(&warnings);
    Ok(run)
}

fn load_index(ctx: &Context) -> Result<Index> {
    let path = ctx.layout.index();
    require(Stage::Index, &path)?;
    Ok(Index::load(&path)?)
}

fn load_variants(ctx: &Context, s: StrategyKind) -> Result<Vec<QueryVariantSet>> {
    let path = ctx.layout.variants_jsonl(s);
    require(Stage::Generate, &path)?;
    Ok(read_variants(&path)?)
}

fn max_variants(sets: &[QueryVariantSet]) -> usize {
    sets.iter().map(|s| s.queries.len()).max().unwrap_or(0)
}

pub fn cmd_index(ctx: &Context) -> Result<Outcome> {
    let out = ctx.layout.index();
    if ctx.skip(Stage::Index, std::slice::from_ref(&out)) {
        return Ok(Outcome::Skipped);
    }
    let analyzer = ctx.config.analyzer_config()?;
    let index = build(read_corpus(&ctx.config.corpus)?, analyzer)?;
    info!("index: {} documents, {} terms", index.num_docs(), index.num_terms());
    index.save(&out)?;
    Ok(Outcome::Ran)
}

fn prompt_strategy(ctx: &Context, s: StrategyKind) -> Result<PromptStrategy> {
    Ok(match s {
        StrategyKind::P1 => PromptStrategy::P1,
        StrategyKind::P2 => PromptStrategy::P2,
        StrategyKind::P3 => PromptStrategy::P3 {
            examples: match &ctx.config.generation.examples {
                Some(p) => load_examples(p)?,
                None => default_examples(),
            },
        },
    })
}

fn backend(ctx: &Context) -> Result<Box<dyn ChatBackend>> {
    if ctx.config.generation.stub {
        return Ok(Box::new(StubBackend));
    }
    let client = OpenAiClient::new(ctx.config.client.clone());
    let cache = ResponseCache::new(ctx.layout.cache())?;
    Ok(Box::new(CachedBackend::new(client, cache)))
}

pub fn cmd_generate(ctx: &Context) -> Result<Outcome> {
    let strategies = &ctx.config.generation.strategies;
    let outputs: Vec<PathBuf> = strategies
        .iter()
        .flat_map(|&s| [ctx.layout.variants_jsonl(s), ctx.layout.variants_tsv(s)])
        .collect();
    if ctx.skip(Stage::Generate, &outputs) {
        return Ok(Outcome::Skipped);
    }
    let topics = ctx.topics()?;
    let backend = backend(ctx)?;
    let options = ctx.config.generation.prompt_options();
    for &s in strategies {
        let strategy = prompt_strategy(ctx, s)?;
        info!("generate: {s} for {} topics", topics.len());
        let generated = ctx.pool.install(|| {
            topics
                .par_iter()
                .map(|t| generate_variants_with(backend.as_ref(), t, &strategy, &options))
                .collect::<varfuse_core::Result<Vec<_>>>()
        })?;
        let mut sets = Vec::with_capacity(generated.len());
        for g in generated {
            if let Some(w) = g.warning {
                warn!("{w}");
            }
            sets.push(g.set);
        }
        write_atomic(&ctx.layout.variants_jsonl(s), &format_variants_jsonl(&sets)?)?;
        write_atomic(&ctx.layout.variants_tsv(s), &format_variants_tsv(&sets)?)?;
    }
    Ok(Outcome::Ran)
}

fn log_warning(w: Option<Warning>, topic: &str) {
    if let Some(w) = w {
        warn!("topic {topic}: {w}");
    }
}

pub fn cmd_retrieve(ctx: &Context) -> Result<Outcome> {
    let strategies = &ctx.config.generation.strategies;
    let mut variant_sets = Vec::with_capacity(strategies.len());
    for &s in strategies {
        variant_sets.push((s, load_variants(ctx, s)?));
    }
    let mut outputs = vec![ctx.layout.baseline_run(BM25_TAG), ctx.layout.baseline_run(RM3_TAG)];
    for (s, sets) in &variant_sets {
        outputs.extend((1..=max_variants(sets)).map(|i| ctx.layout.variant_run(*s, i)));
    }
    if ctx.skip(Stage::Retrieve, &outputs) {
        return Ok(Outcome::Skipped);
    }
    let index = load_index(ctx)?;
    let topics = ctx.topics()?;
    let bm25 = &ctx.config.bm25;

    info!("retrieve: baselines for {} topics", topics.len());
    let baselines = ctx.pool.install(|| {
        topics
            .par_iter()
            .map(|t| -> varfuse_core::Result<(Ranking, Ranking)> {
                let plain = search(&index, &t.title, bm25)?;
                log_warning(plain.warning.clone(), &t.topic_id);
                let expansion = rm3_expand(&index, &t.title, &ctx.config.rm3, bm25)?;
                log_warning(expansion.warning, &t.topic_id);
                let expanded = search_weighted(&index, &expansion.query, bm25)?;
                Ok((
                    plain.into_ranking(&t.topic_id, BM25_TAG),
                    expanded.into_ranking(&t.topic_id, RM3_TAG),
                ))
            })
            .collect::<varfuse_core::Result<Vec<_>>>()
    })?;
    let (plain, expanded): (Vec<Ranking>, Vec<Ranking>) = baselines.into_iter().unzip();
    write_atomic(&ctx.layout.baseline_run(BM25_TAG), &format_run(&plain, BM25_TAG)?)?;
    write_atomic(&ctx.layout.baseline_run(RM3_TAG), &format_run(&expanded, RM3_TAG)?)?;

    for (s, sets) in &variant_sets {
        let n = max_variants(sets);
        info!("retrieve: {n} variants per topic for {s}");
        let per_topic = ctx.pool.install(|| {
            sets.par_iter()
                .map(|set| {
                    set.queries
                        .iter()
                        .map(|q| {
                            let r = search(&index, q, bm25)?;
                            log_warning(r.warning.clone(), &set.topic_id);
                            Ok(r.into_ranking(&set.topic_id, ""))
                        })
                        .collect::<varfuse_core::Result<Vec<Ranking>>>()
                })
                .collect::<varfuse_core::Result<Vec<_>>>()
        })?;
        for i in 0..n {
            let tag = variant_tag(*s, i + 1);
            let run: Vec<Ranking> = per_topic.iter().filter_map(|rs| rs.get(i).cloned()).collect();
            write_atomic(&ctx.layout.variant_run(*s, i + 1), &format_run(&run, &tag)?)?;
        }
    }
    Ok(Outcome::Ran)
}

/// Fused ranking per topic from the first `m` variant runs.
fn fuse_strategy(ctx: &Context, s: StrategyKind, topics: &[Topic], available: usize, m: usize) -> Result<Vec<Ranking>> {
    let used = m.min(available);
    if used < m {
        warn!("fuse: {s} has only {available} variants per topic, fusing {used} for m = {m}");
    }
    let mut by_topic: HashMap<String, Vec<Ranking>> = topics
        .iter()
        .map(|t| (t.topic_id.clone(), Vec::with_capacity(used)))
        .collect();
    for i in 1..=used {
        let run = load_run(Stage::Retrieve, &ctx.layout.variant_run(s, i))?;
        let mut found: HashMap<String, Ranking> = run.into_iter().map(|r| (r.topic_id.clone(), r)).collect();
        for (topic, rankings) in by_topic.iter_mut() {
            // A variant without matches has no lines in the run file.
            rankings.push(
                found
                    .remove(topic)
                    .unwrap_or_else(|| Ranking::new(topic.as_str(), "", Vec::new())),
            );
        }
    }
    let rrf = &ctx.config.rrf;
    let fused = ctx.pool.install(|| {
        topics
            .par_iter()
            .map(|t| fuse_first_m(&by_topic[&t.topic_id], used, rrf))
            .collect::<varfuse_core::Result<Vec<_>>>()
    })?;
    Ok(fused)
}

pub fn cmd_fuse(ctx: &Context) -> Result<Outcome> {
    let g = &ctx.config.generation;
    let k = ctx.config.rrf.k;
    let outputs: Vec<PathBuf> = g
        .strategies
        .iter()
        .flat_map(|&s| {
            g.m_values
                .iter()
                .map(move |&m| ctx.layout.fused_run(&fused_tag(s, k, m)))
        })
        .collect();
    if ctx.skip(Stage::Fuse, &outputs) {
        return Ok(Outcome::Skipped);
    }
    let topics = ctx.topics()?;
    for &s in &g.strategies {
        let available = max_variants(&load_variants(ctx, s)?);
        if available == 0 {
            return Err(varfuse_core::Error::invalid("variant dataset", format!("{s} has no queries")).into());
        }
        for &m in &g.m_values {
            let tag = fused_tag(s, k, m);
            info!("fuse: {tag}");
            let fused = fuse_strategy(ctx, s, &topics, available, m)?;
            write_atomic(&ctx.layout.fused_run(&tag), &format_run(&fused, &tag)?)?;
        }
    }
    Ok(Outcome::Ran)
}

fn fused_tags(ctx: &Context) -> Vec<String> {
    let g = &ctx.config.generation;
    g.strategies
        .iter()
        .flat_map(|&s| g.m_values.iter().map(move |&m| fused_tag(s, ctx.config.rrf.k, m)))
        .collect()
}

fn report_for(
    ctx: &Context,
    name: &str,
    run: &[Ranking],
    qrels: &Qrels,
    baselines: &[(&str, &[Ranking])],
) -> Result<RunReport> {
    let e = &ctx.config.evaluation;
    let mut metrics = Vec::with_capacity(Metric::STANDARD.len());
    for metric in Metric::STANDARD {
        let (mut report, warnings) = evaluate(run, qrels, metric);
        log_all(&warnings);
        for (baseline, base_run) in baselines {
            let (base_scores, _) = per_topic(base_run, qrels, metric);
            let test = match paired_test(&report.per_topic, &base_scores) {
                Ok(t) => t,
                Err(err) => {
                    warn!("{name} vs {baseline}, {metric}: no significance test ({err})");
                    continue;
                }
            };
            let p = test.p(e.alternative);
            report.significance.push(Significance {
                baseline: baseline.to_string(),
                test: "paired-t".into(),
                t_statistic: test.t_statistic,
                p_value: p,
                significant: p < e.alpha && test.mean_difference > 0.0,
            });
        }
        metrics.push(report);
    }
    Ok(RunReport {
        run: name.to_string(),
        metrics,
    })
}

pub fn cmd_evaluate(ctx: &Context) -> Result<Outcome> {
    let outputs = [ctx.layout.report_table(), ctx.layout.report_jsonl()];
    if ctx.skip(Stage::Evaluate, &outputs) {
        return Ok(Outcome::Skipped);
    }
    let qrels = ctx.qrels()?;
    let bm25 = load_run(Stage::Retrieve, &ctx.layout.baseline_run(BM25_TAG))?;
    let rm3 = load_run(Stage::Retrieve, &ctx.layout.baseline_run(RM3_TAG))?;
    let mut reports = vec![
        report_for(ctx, BM25_TAG, &bm25, &qrels, &[])?,
        report_for(ctx, RM3_TAG, &rm3, &qrels, &[(BM25_TAG, &bm25)])?,
    ];
    for tag in fused_tags(ctx) {
        let run = load_run(Stage::Fuse, &ctx.layout.fused_run(&tag))?;
        reports.push(report_for(
            ctx,
            &tag,
            &run,
            &qrels,
            &[(BM25_TAG, &bm25), (RM3_TAG, &rm3)],
        )?);
    }
    let baselines = [BM25_TAG.to_string(), RM3_TAG.to_string()];
    write_atomic(&ctx.layout.report_table(), &render_table(&reports, &baselines))?;
    write_atomic(&ctx.layout.report_jsonl(), &render_jsonl(&reports))?;
    Ok(Outcome::Ran)
}

/// Tab-separated `topic`, `delta` lines under a header, largest delta first.
pub fn format_deltas(deltas: &[(String, f64)]) -> String {
    let mut out = String::from("topic\tdelta_ndcg\n");
    for (topic, d) in deltas {
        out.push_str(&format!("{topic}\t{d}\n"));
    }
    out
}

pub fn cmd_analyze(ctx: &Context) -> Result<Outcome> {
    let g = &ctx.config.generation;
    let outputs: Vec<PathBuf> = g
        .strategies
        .iter()
        .flat_map(|&s| g.m_values.iter().map(move |&m| ctx.layout.delta(s, m)))
        .collect();
    if ctx.skip(Stage::Analyze, &outputs) {
        return Ok(Outcome::Skipped);
    }
    let qrels = ctx.qrels()?;
    let metric = Metric::Ndcg(ctx.config.evaluation.delta_ndcg_cutoff);
    let bm25 = load_run(Stage::Retrieve, &ctx.layout.baseline_run(BM25_TAG))?;
    let (base_scores, _) = per_topic(&bm25, &qrels, metric);
    for &s in &g.strategies {
        for &m in &g.m_values {
            let run = load_run(Stage::Fuse, &ctx.layout.fused_run(&fused_tag(s, ctx.config.rrf.k, m)))?;
            let (scores, _) = per_topic(&run, &qrels, metric);
            let deltas = varfuse_core::metrics::delta_from_scores(&scores, &base_scores)?;
            write_atomic(&ctx.layout.delta(s, m), &format_deltas(&deltas))?;
        }
    }
    Ok(Outcome::Ran)
}

pub fn run_stage(ctx: &Context, stage: Stage) -> Result<Outcome> {
    match stage {
        Stage::Index => cmd_index(ctx),
        Stage::Generate => cmd_generate(ctx),
        Stage::Retrieve => cmd_retrieve(ctx),
        Stage::Fuse => cmd_fuse(ctx),
        Stage::Evaluate => cmd_evaluate(ctx),
        Stage::Analyze => cmd_analyze(ctx),
    }
}

/// Every stage in order.
pub fn cmd_experiment(ctx: &Context) -> Result<Vec<(Stage, Outcome)>> {
    let mut outcomes = Vec::with_capacity(Stage::ALL.len());
    for stage in Stage::ALL {
        outcomes.push((stage, run_stage(ctx, stage)?));
    }
    Ok(outcomes)
}

/// Parses a delta TSV back into `(topic, delta)` pairs.
pub fn parse_deltas(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parsed = line
            .split_once('\t')
            .and_then(|(t, d)| d.parse::<f64>().ok().map(|d| (t.to_string(), d)));
        match parsed {
            Some(p) => out.push(p),
            None => return Err(varfuse_core::Error::parse("delta table", i + 1, format!("bad line {line:?}")).into()),
        }
    }
    Ok(out)
}

/// Mean of a metric over a run's evaluated topics.
pub fn mean_metric(run: &[Ranking], qrels: &Qrels, metric: Metric) -> (f64, BTreeMap<String, f64>) {
    let (scores, _) = per_topic(run, qrels, metric);
    (varfuse_core::metrics::mean(scores.values().copied()), scores)
}
