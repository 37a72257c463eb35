//! Exhaustive top-k retrieval and run-file IO.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::corpus::{pool, Corpus, EmbeddingView};
use crate::error::{Error, Result};
use crate::scoring::{masks_for, pooled_cosine, score_maxsim, MaskKind, MaskOptions, ScoreKind, ScoreMode};

/// Normalized OCR token set per document id.
pub type OcrIndex = HashMap<String, HashSet<String>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Ranked hits for one query. Scores are non-increasing; equal scores are
/// ordered by ascending doc id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub query_id: String,
    pub hits: Vec<Hit>,
}

impl Ranking {
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.hits.iter().find(|h| h.doc_id == doc_id).map(|h| h.rank)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    pub mask: MaskOptions,
}

/// Scores `query` against every document, in corpus order.
pub fn score_all(
    corpus: &Corpus,
    query: EmbeddingView<'_>,
    mode: ScoreMode,
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<Vec<f64>> {
    if query.dim != corpus.dim() {
        return Err(Error::Dimension {
            first_id: query.id.to_owned(),
            second_id: corpus.ids().first().cloned().unwrap_or_else(|| "<corpus>".into()),
            expected: query.dim,
            found: corpus.dim(),
        });
    }
    match mode.kind() {
        ScoreKind::Pooled => {
            let q = pool(query, corpus.pooling());
            Ok(par_map(corpus.len(), |i| pooled_cosine(&q, corpus.pooled(i))))
        }
        ScoreKind::MaxSim if mode.mask().needs_ocr() => {
            let ocr = ocr.ok_or_else(|| {
                Error::invalid(format!("mask `{}` needs an OCR index", mode.mask()))
            })?;
            if let Some(missing) = corpus.ids().iter().find(|id| !ocr.contains_key(*id)) {
                return Err(Error::MissingOcr(missing.clone()));
            }
            if query.tokens.is_none() {
                return Err(Error::MissingTokens(query.id.to_owned()));
            }
            par_try_map(corpus.len(), |i| {
                let doc = corpus.get(i);
                let mask = masks_for(query, mode.mask(), Some(&ocr[doc.id]), opts.mask)?;
                score_maxsim(query, doc, &mask).map(|s| s.value)
            })
        }
        ScoreKind::MaxSim => {
            let mask = masks_for(query, mode.mask(), None, opts.mask)?;
            par_try_map(corpus.len(), |i| score_maxsim(query, corpus.get(i), &mask).map(|s| s.value))
        }
    }
}

/// Top-k documents for one query.
pub fn search(
    corpus: &Corpus,
    query: EmbeddingView<'_>,
    mode: ScoreMode,
    k: usize,
    ocr: Option<&OcrIndex>,
) -> Result<Ranking> {
    search_with(corpus, query, mode, k, ocr, &SearchOptions::default())
}

pub fn search_with(
    corpus: &Corpus,
    query: EmbeddingView<'_>,
    mode: ScoreMode,
    k: usize,
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<Ranking> {
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let scores = score_all(corpus, query, mode, ocr, opts)?;
    Ok(Ranking {
        query_id: query.id.to_owned(),
        hits: top_k(corpus.ids(), &scores, k),
    })
}

fn order(ids: &[String], scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| ids[a].cmp(&ids[b]))
}

/// Selects the `k` best indices under (score desc, id asc).
pub fn top_k(ids: &[String], scores: &[f64], k: usize) -> Vec<Hit> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k < idx.len() {
        idx.select_nth_unstable_by(k, |&a, &b| order(ids, scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| order(ids, scores, a, b));
    idx.into_iter()
        .enumerate()
        .map(|(r, i)| Hit {
            doc_id: ids[i].clone(),
            score: scores[i],
            rank: r + 1,
        })
        .collect()
}

/// Runs [`search_with`] for every query of `queries`; output order follows
/// input order. Failures are gathered with their query ids.
pub fn batch_search(
    corpus: &Corpus,
    queries: &[EmbeddingView<'_>],
    mode: ScoreMode,
    k: usize,
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<Vec<Ranking>> {
    let results = par_map(queries.len(), |i| search_with(corpus, queries[i], mode, k, ocr, opts));
    let mut rankings = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (q, res) in queries.iter().zip(results) {
        match res {
            Ok(r) => rankings.push(r),
            Err(e) => failures.push((q.id.to_owned(), e)),
        }
    }
    if failures.is_empty() {
        Ok(rankings)
    } else {
        Err(Error::Batch(failures))
    }
}

/// Convenience over a query corpus.
pub fn batch_search_corpus(
    corpus: &Corpus,
    queries: &Corpus,
    mode: ScoreMode,
    k: usize,
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<Vec<Ranking>> {
    let views: Vec<_> = queries.iter().collect();
    batch_search(corpus, &views, mode, k, ocr, opts)
}

/// Runs `f` on a dedicated pool of `workers` threads (or the global pool
/// when `None`).
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

fn par_try_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    par_map(n, f).into_iter().collect()
}

/// `%.9g`-style formatting used for run-file scores.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Six-column run format: `qid Q0 docid rank score tag`, tab separated.
pub fn write_run<W: Write>(rankings: &[Ranking], tag: &str, w: &mut W) -> std::io::Result<()> {
    for r in rankings {
        for h in &r.hits {
            writeln!(
                w,
                "{}\tQ0\t{}\t{}\t{}\t{}",
                r.query_id,
                h.doc_id,
                h.rank,
                format_significant(h.score, 9),
                tag
            )?;
        }
    }
    Ok(())
}

pub fn write_run_file(rankings: &[Ranking], tag: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_run(rankings, tag, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a run file; queries keep their order of first appearance and hits
/// are re-sorted by rank.
pub fn read_run_file(path: impl AsRef<Path>) -> Result<Vec<Ranking>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_query: HashMap<String, Vec<Hit>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        if cols.len() < 5 {
            return Err(parse_err(format!("expected 6 columns, found {}", cols.len())));
        }
        let rank: usize = cols[3].parse().map_err(|_| parse_err(format!("bad rank `{}`", cols[3])))?;
        let score: f64 = cols[4].parse().map_err(|_| parse_err(format!("bad score `{}`", cols[4])))?;
        let qid = cols[0].to_owned();
        if !by_query.contains_key(&qid) {
            order.push(qid.clone());
        }
        by_query.entry(qid).or_default().push(Hit {
            doc_id: cols[2].to_owned(),
            score,
            rank,
        });
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let mut hits = by_query.remove(&qid).unwrap_or_default();
            hits.sort_by_key(|h| h.rank);
            Ranking { query_id: qid, hits }
        })
        .collect())
}

/// Per-document score under each mask; used to reconcile the attribution
/// partition end to end.
pub fn masked_score_table(
    corpus: &Corpus,
    query: EmbeddingView<'_>,
    masks: &[MaskKind],
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<Vec<Vec<f64>>> {
    masks
        .iter()
        .map(|&m| score_all(corpus, query, ScoreMode::maxsim(m), ocr, opts))
        .collect()
}
