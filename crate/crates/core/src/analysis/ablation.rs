//! Masked-mode matching ablation: special-token vs query-token matching, and
//! lexical vs non-lexical query-token matching.

use std::io::Write;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Qrels};
use crate::scoring::{MaskKind, ScoreMode};
use crate::search::{batch_search_corpus, masked_score_table, OcrIndex, SearchOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mask: String,
    #[serde(rename = "ndcg@5")]
    pub ndcg_at_5: f64,
    /// Percentage change against the all-tokens run; `None` when that run
    /// scores zero.
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, mask: MaskKind) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mask == mask.as_str())
    }

    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for r in &self.rows {
            writeln!(w, "{}", serde_json::to_string(r).expect("row serializes"))?;
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "mask\tndcg@5\tdelta_pct")?;
        for r in &self.rows {
            let delta = r.delta_pct.map_or_else(|| "NA".to_owned(), |d| format!("{d:+.1}%"));
            writeln!(w, "{}\t{:.4}\t{delta}", r.mask, r.ndcg_at_5)?;
        }
        Ok(())
    }
}

/// One evaluation run per mask, with deltas relative to the `All` run.
pub fn matching_ablation(
    corpus: &Corpus,
    queries: &Corpus,
    qrels: &Qrels,
    ocr: Option<&OcrIndex>,
    masks: &[MaskKind],
    opts: &SearchOptions,
) -> Result<AblationTable> {
    if masks.is_empty() {
        return Err(Error::invalid("at least one mask is required"));
    }
    let run = |mask: MaskKind| -> Result<f64> {
        let rankings = batch_search_corpus(corpus, queries, ScoreMode::maxsim(mask), 5, ocr, opts)?;
        Ok(evaluate(&rankings, qrels, 5)?.mean_ndcg)
    };
    let mut scores: Vec<(MaskKind, f64)> = Vec::with_capacity(masks.len());
    for &mask in masks {
        scores.push((mask, run(mask)?));
    }
    let baseline = match scores.iter().find(|(m, _)| *m == MaskKind::All) {
        Some(&(_, s)) => s,
        None => run(MaskKind::All)?,
    };
    let rows = scores
        .into_iter()
        .map(|(mask, ndcg)| AblationRow {
            mask: mask.as_str().to_owned(),
            ndcg_at_5: ndcg,
            delta_pct: (baseline != 0.0).then(|| (ndcg - baseline) / baseline * 100.0),
        })
        .collect();
    Ok(AblationTable { rows })
}

/// Largest per-(query, doc) violation of the two mask partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub pairs: usize,
    /// max |all - (stm + qtm)|
    pub kind_residual: f64,
    /// max |qtm - (qtm_lex + qtm_nonlex)|, when OCR is available
    pub lexical_residual: Option<f64>,
}

pub fn partition_check(
    corpus: &Corpus,
    queries: &Corpus,
    ocr: Option<&OcrIndex>,
    opts: &SearchOptions,
) -> Result<PartitionCheck> {
    let masks: &[MaskKind] = if ocr.is_some() {
        &MaskKind::ALL
    } else {
        &MaskKind::ALL[..3]
    };
    let mut kind_residual = 0f64;
    let mut lexical_residual = ocr.map(|_| 0f64);
    for q in queries.iter() {
        let t = masked_score_table(corpus, q, masks, ocr, opts)?;
        #[allow(clippy::needless_range_loop)]
        for d in 0..corpus.len() {
            kind_residual = kind_residual.max((t[0][d] - (t[1][d] + t[2][d])).abs());
            if let Some(r) = lexical_residual.as_mut() {
                *r = r.max((t[2][d] - (t[3][d] + t[4][d])).abs());
            }
        }
    }
    Ok(PartitionCheck {
        pairs: queries.len() * corpus.len(),
        kind_residual,
        lexical_residual,
    })
}
