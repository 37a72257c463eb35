//! Effectiveness metrics against graded qrels and the index-scaling
//! latency benchmark.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::search::{search_with, with_workers, OcrIndex, Ranking, SearchOptions};
use crate::scoring::ScoreMode;

/// Relevance judgments: query id → doc id → grade. Unjudged documents are
/// non-relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.get(query_id)
            .and_then(|docs| docs.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Documents with a positive grade for any query.
    pub fn relevant_docs(&self) -> HashSet<&str> {
        self.judgments
            .values()
            .flat_map(|docs| docs.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d.as_str()))
            .collect()
    }

    fn entry(&self, query_id: &str) -> Result<&BTreeMap<String, u32>> {
        self.get(query_id)
            .ok_or_else(|| Error::MissingQrels(query_id.to_owned()))
    }
}

/// Reads `query_id 0 doc_id grade` lines (tab or space separated).
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = Qrels::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        }
        let grade: u32 = cols[3]
            .parse()
            .map_err(|_| err(format!("grade `{}` is not a non-negative integer", cols[3])))?;
        qrels.insert(cols[0], cols[2], grade);
    }
    Ok(qrels)
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (q, docs) in &qrels.judgments {
        for (d, g) in docs {
            writeln!(w, "{q}\t0\t{d}\t{g}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// nDCG@k with gain = grade and discount `1 / log2(rank + 1)`, normalized by
/// the ideal DCG over the query's full judgments.
pub fn ndcg_at_k(ranking: &Ranking, qrels: &Qrels, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let judged = qrels.entry(&ranking.query_id)?;
    let mut grades: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: f64 = grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / ((i + 2) as f64).log2())
        .sum();
    if ideal == 0.0 {
        return Err(Error::UndefinedIdeal(ranking.query_id.clone()));
    }
    let dcg: f64 = ranking
        .hits
        .iter()
        .filter(|h| h.rank <= k)
        .map(|h| f64::from(judged.get(&h.doc_id).copied().unwrap_or(0)) / ((h.rank + 1) as f64).log2())
        .sum();
    Ok(dcg / ideal)
}

/// Fraction of the query's relevant documents found in the top `k`.
pub fn recall_at_k(ranking: &Ranking, qrels: &Qrels, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let judged = qrels.entry(&ranking.query_id)?;
    let relevant = judged.values().filter(|&&g| g > 0).count();
    if relevant == 0 {
        return Err(Error::UndefinedIdeal(ranking.query_id.clone()));
    }
    let found = ranking
        .hits
        .iter()
        .filter(|h| h.rank <= k && judged.get(&h.doc_id).is_some_and(|&g| g > 0))
        .count();
    Ok(found as f64 / relevant as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub k: usize,
    pub ndcg: f64,
    #[serde(rename = "recall@1")]
    pub recall_at_1: f64,
    #[serde(rename = "recall@k")]
    pub recall_at_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub queries: usize,
    pub k: usize,
    pub mean_ndcg: f64,
    #[serde(rename = "mean_recall@1")]
    pub mean_recall_at_1: f64,
    #[serde(rename = "mean_recall@k")]
    pub mean_recall_at_k: f64,
    #[serde(skip)]
    pub per_query: Vec<QueryMetrics>,
}

pub fn evaluate(rankings: &[Ranking], qrels: &Qrels, k: usize) -> Result<EvalSummary> {
    let per_query = rankings
        .iter()
        .map(|r| {
            Ok(QueryMetrics {
                query_id: r.query_id.clone(),
                k,
                ndcg: ndcg_at_k(r, qrels, k)?,
                recall_at_1: recall_at_k(r, qrels, 1)?,
                recall_at_k: recall_at_k(r, qrels, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / per_query.len() as f64
        }
    };
    Ok(EvalSummary {
        queries: per_query.len(),
        k,
        mean_ndcg: mean(|m| m.ndcg),
        mean_recall_at_1: mean(|m| m.recall_at_1),
        mean_recall_at_k: mean(|m| m.recall_at_k),
        per_query,
    })
}

/// Per-query lines followed by one summary line.
pub fn write_eval_report<W: Write>(summary: &EvalSummary, w: &mut W) -> std::io::Result<()> {
    for m in &summary.per_query {
        writeln!(w, "{}", serde_json::to_string(m).expect("metrics serialize"))?;
    }
    writeln!(w, "{}", serde_json::to_string(summary).expect("summary serializes"))
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub corpus_size: usize,
    pub mode: String,
    pub workers: Option<usize>,
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg_at_5: f64,
}

impl LatencyReport {
    fn from_durations(corpus_size: usize, mode: ScoreMode, workers: Option<usize>, durations: &[Duration], ndcg_at_5: f64) -> Self {
        let latencies_ms: Vec<f64> = durations.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        let mut sorted = latencies_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let mean_ms = if sorted.is_empty() {
            0.0
        } else {
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        LatencyReport {
            corpus_size,
            mode: mode.to_string(),
            workers,
            p50_ms: nearest_rank(&sorted, 0.50),
            p95_ms: nearest_rank(&sorted, 0.95),
            mean_ms,
            latencies_ms,
            ndcg_at_5,
        }
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub workers: Option<usize>,
    /// Depth of each timed search; at least 5 so nDCG@5 is exact.
    pub k: usize,
    pub search: SearchOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            workers: None,
            k: 10,
            search: SearchOptions::default(),
        }
    }
}

/// For each target size, grows `base` with a prefix of `distractors`, runs
/// every query once untimed, then once timed, and reports latency and
/// nDCG@5.
#[allow(clippy::too_many_arguments)]
pub fn bench_scaling(
    corpus_sizes: &[usize],
    base: &Corpus,
    distractors: &Corpus,
    queries: &Corpus,
    qrels: &Qrels,
    mode: ScoreMode,
    ocr: Option<&OcrIndex>,
    opts: &BenchOptions,
) -> Result<Vec<LatencyReport>> {
    if corpus_sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("corpus sizes must be ascending"));
    }
    let available = base.len() + distractors.len();
    if let Some(&too_big) = corpus_sizes.iter().find(|&&s| s > available) {
        return Err(Error::invalid(format!(
            "insufficient distractors: size {too_big} needs {} but only {} are available",
            too_big.saturating_sub(base.len()),
            distractors.len()
        )));
    }
    if let Some(&too_small) = corpus_sizes.iter().find(|&&s| s < base.len()) {
        return Err(Error::invalid(format!(
            "size {too_small} is smaller than the base corpus ({})",
            base.len()
        )));
    }
    let max_extra = corpus_sizes.last().map_or(0, |&s| s - base.len());
    let relevant = qrels.relevant_docs();
    for id in &distractors.ids()[..max_extra] {
        if base.position(id).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
        if relevant.contains(id.as_str()) {
            return Err(Error::invalid(format!("distractor `{id}` is judged relevant")));
        }
    }
    let k = opts.k.max(5);
    let views: Vec<_> = queries.iter().collect();

    let mut reports = Vec::with_capacity(corpus_sizes.len());
    for &size in corpus_sizes {
        let corpus = base.concat_prefix(base.len(), distractors, size - base.len())?;
        let (rankings, durations) = with_workers(opts.workers, || -> Result<_> {
            for q in &views {
                search_with(&corpus, *q, mode, k, ocr, &opts.search)?;
            }
            let mut rankings = Vec::with_capacity(views.len());
            let mut durations = Vec::with_capacity(views.len());
            for q in &views {
                let start = Instant::now();
                let r = search_with(&corpus, *q, mode, k, ocr, &opts.search)?;
                durations.push(start.elapsed());
                rankings.push(r);
            }
            Ok((rankings, durations))
        })??;
        let summary = evaluate(&rankings, qrels, 5)?;
        reports.push(LatencyReport::from_durations(size, mode, opts.workers, &durations, summary.mean_ndcg));
    }
    Ok(reports)
}
