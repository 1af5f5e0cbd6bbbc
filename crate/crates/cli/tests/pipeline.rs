use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use varfuse::pipeline::{cmd_experiment, cmd_fuse, cmd_retrieve};
use varfuse::synth::write_synthetic;
use varfuse::{CliError, Context, ExperimentConfig, Outcome, RunOptions, Stage};
use varfuse_core::synthfixture::SynthSpec;
use varfuse_core::trecio::{read_run, ParseMode};

fn fixture(dir: &Path) -> ExperimentConfig {
    let spec = SynthSpec {
        num_topics: 4,
        docs_per_topic: 30,
        relevant_per_topic: 5,
        vocab_size: 300,
        ..SynthSpec::default()
    };
    let path = write_synthetic(&spec, dir).unwrap();
    let mut config = ExperimentConfig::load(&path).unwrap();
    config.generation.num_queries = 12;
    config.generation.m_values = vec![3, 10];
    config.workers = 2;
    config
}

fn context(config: &ExperimentConfig, force: bool) -> Context {
    Context::new(config.clone(), RunOptions { force }).unwrap()
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn experiment_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let ctx = context(&config, false);
    let outcomes = cmd_experiment(&ctx).unwrap();
    assert!(outcomes.iter().all(|(_, o)| *o == Outcome::Ran));
    let l = &ctx.layout;
    assert!(l.index().is_file());
    assert!(l.baseline_run("bm25").is_file());
    assert!(l.baseline_run("bm25-rm3").is_file());
    for s in ["P1", "P2", "P3"] {
        assert!(l.root().join(format!("variants/{s}.jsonl")).is_file());
        assert!(l.root().join(format!("variants/{s}.tsv")).is_file());
        for m in [3, 10] {
            let fused = l.root().join(format!("runs/fused/{s}-rrf60-m{m}.run"));
            let (run, _) = read_run(&fused, ParseMode::Strict).unwrap();
            assert_eq!(run.len(), 4);
            assert!(run.iter().all(|r| r.system_tag == format!("{s}-rrf60-m{m}")));
            assert!(l.root().join(format!("analysis/delta-ndcg-{s}-m{m}.tsv")).is_file());
        }
        assert_eq!(
            std::fs::read_dir(l.root().join(format!("runs/variants/{s}")))
                .unwrap()
                .count(),
            12
        );
    }
    let table = std::fs::read_to_string(l.report_table()).unwrap();
    assert!(table.starts_with("run"));
    assert!(table.contains("P2-rrf60-m10") && table.contains("nDCG@10") && table.contains("Bpref"));
    assert!(l.report_jsonl().is_file());
}

#[test]
fn rerun_without_force_skips_everything() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    cmd_experiment(&context(&config, false)).unwrap();
    let before = snapshot(&config.output);
    let outcomes = cmd_experiment(&context(&config, false)).unwrap();
    assert!(outcomes.iter().all(|(_, o)| *o == Outcome::Skipped), "{outcomes:?}");
    assert_eq!(snapshot(&config.output), before);
}

#[test]
fn forced_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture(dir.path());
    cmd_experiment(&context(&config, false)).unwrap();
    let first = snapshot(&config.output);
    config.output = dir.path().join("second");
    config.workers = 1;
    cmd_experiment(&context(&config, true)).unwrap();
    assert_eq!(snapshot(&config.output), first);
}

#[test]
fn deleted_fusion_outputs_are_regenerated_without_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let ctx = context(&config, false);
    cmd_experiment(&ctx).unwrap();
    let before = snapshot(&config.output);
    std::fs::remove_dir_all(config.output.join("runs/fused")).unwrap();
    let outcomes = cmd_experiment(&ctx).unwrap();
    for (stage, outcome) in outcomes {
        let expected = if stage == Stage::Fuse {
            Outcome::Ran
        } else {
            Outcome::Skipped
        };
        assert_eq!(outcome, expected, "{stage}");
    }
    assert_eq!(snapshot(&config.output), before);
}

#[test]
fn missing_upstream_artifact_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let ctx = context(&config, false);
    match cmd_retrieve(&ctx) {
        Err(CliError::MissingStage { stage, .. }) => assert_eq!(stage, "generate"),
        other => panic!("{other:?}"),
    }
    varfuse::cmd_generate(&ctx).unwrap();
    match cmd_retrieve(&ctx) {
        Err(CliError::MissingStage { stage, .. }) => assert_eq!(stage, "index"),
        other => panic!("{other:?}"),
    }
    match cmd_fuse(&ctx) {
        Err(e @ CliError::MissingStage { .. }) => assert!(e.to_string().contains("retrieve")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_config_is_rejected_with_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture(dir.path());
    config.generation.m_values = vec![0, 50];
    config.corpus = dir.path().join("missing.jsonl");
    match Context::new(config, RunOptions::default()) {
        Err(CliError::Config(v)) => assert_eq!(v.len(), 3, "{v:?}"),
        other => panic!("{:?}", other.err()),
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varfuse"))
}

#[test]
fn binary_runs_and_reports_error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let synth = binary()
        .args(["synth", "--out"])
        .arg(dir.path())
        .args([
            "--topics",
            "3",
            "--docs-per-topic",
            "20",
            "--relevant-per-topic",
            "4",
            "--vocab-size",
            "300",
        ])
        .output()
        .unwrap();
    assert!(synth.status.success());
    let config = dir.path().join("experiment.toml");
    let experiment = binary().arg("experiment").arg("-c").arg(&config).output().unwrap();
    assert!(
        experiment.status.success(),
        "{}",
        String::from_utf8_lossy(&experiment.stderr)
    );
    assert!(dir.path().join("out/report/table.txt").is_file());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "corpus = \"nope\"\ntopics = \"nope\"\nqrels = \"nope\"\n").unwrap();
    let out = binary().arg("index").arg("-c").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("corpus") && stderr.contains("topics") && stderr.contains("qrels"),
        "{stderr}"
    );

    let fresh = dir.path().join("fresh");
    let out = binary()
        .arg("fuse")
        .arg("-c")
        .arg(&config)
        .arg("--output")
        .arg(&fresh)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generate"));

    std::fs::write(dir.path().join("qrels.txt"), "1 0 d1 notanumber\n").unwrap();
    let out = binary()
        .arg("evaluate")
        .arg("-c")
        .arg(&config)
        .arg("--force")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}
