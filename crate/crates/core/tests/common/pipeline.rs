//! Drives the `vdr` binary through a full fixture-to-report pipeline.

use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_vdr");

pub fn vdr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("vdr runs")
}

pub fn ok(args: &[&str]) -> String {
    let out = vdr(args);
    assert!(
        out.status.success(),
        "vdr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Files whose bytes must not change between runs, relative to the output
/// directory.
pub const OUTPUTS: &[&str] = &[
    "corpus.vdre",
    "queries.vdre",
    "queries.tokens.jsonl",
    "qrels.tsv",
    "ocr.jsonl",
    "pages/d000003.png",
    "run.maxsim.tsv",
    "run.pooled.tsv",
    "eval.jsonl",
    "simmap.jsonl",
    "features/features.jsonl",
    "features/significance.jsonl",
    "features/significance.tsv",
    "matching/ablation.jsonl",
    "matching/ablation.tsv",
    "matching/scores.tsv",
    "matching/partition.json",
];

pub fn run_pipeline(dir: &Path) {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (corpus, queries, tokens, qrels, ocr) =
        (p("corpus.vdre"), p("queries.vdre"), p("queries.tokens.jsonl"), p("qrels.tsv"), p("ocr.jsonl"));
    ok(&["synth", "--out-dir", &p(""), "--seed", "42", "--num-docs", "60", "--num-queries", "12",
        "--patches", "12-20", "--tokens-per-query", "3-7", "--planted", "0.5", "--noise", "1.0"]);
    for mode in ["maxsim", "pooled"] {
        ok(&["search", "--corpus", &corpus, "--queries", &queries, "--tokens", &tokens, "--mode", mode,
            "--k", "10", "--out", &p(&format!("run.{mode}.tsv"))]);
    }
    ok(&["evaluate", "--qrels", &qrels, "--run", &p("run.maxsim.tsv"), "--k", "5", "--out", &p("eval.jsonl")]);
    ok(&["simmap", "--corpus", &corpus, "--queries", &queries, "--tokens", &tokens,
        "--query-id", "q00001", "--doc-id", "d000005", "--out", &p("simmap.jsonl")]);
    ok(&["analyze", "features", "--corpus", &corpus, "--queries", &queries, "--qrels", &qrels, "--ocr", &ocr,
        "--images", &p("pages"), "--out-dir", &p("features")]);
    ok(&["analyze", "matching", "--corpus", &corpus, "--queries", &queries, "--tokens", &tokens, "--ocr", &ocr,
        "--qrels", &qrels, "--modes", "all,stm,qtm,qtm-lex,qtm-nonlex", "--out-dir", &p("matching")]);
}
