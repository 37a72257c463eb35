//! Reference implementations written straight from the definitions, plus
//! random instance generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdr_core::{MultiVectorEmbedding, TokenKind, TokenMeta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` rows of width `dim` with entries uniform in [-1, 1]; never all zero.
pub fn raw_rows(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let row: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if row.iter().any(|v| v.abs() > 1e-3) {
                break row;
            }
        })
        .collect()
}

pub fn flat(rows: &[Vec<f64>]) -> Vec<f32> {
    rows.iter().flatten().map(|&v| v as f32).collect()
}

pub fn unit(row: &[f64]) -> Vec<f64> {
    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    row.iter().map(|v| v / n).collect()
}

/// Double loop over normalized rows, entirely in f64.
pub fn naive_maxsim(query: &[Vec<f64>], doc: &[Vec<f64>], active: &[bool]) -> f64 {
    let doc: Vec<Vec<f64>> = doc.iter().map(|r| unit(r)).collect();
    let mut total = 0.0;
    for (i, q) in query.iter().enumerate() {
        if !active[i] {
            continue;
        }
        let q = unit(q);
        let mut best = f64::NEG_INFINITY;
        for d in &doc {
            let s: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

pub fn random_kinds(rng: &mut impl Rng, n: usize) -> Vec<TokenMeta> {
    (0..n)
        .map(|i| match rng.random_range(0..4) {
            0 => TokenMeta::new("<pad>", TokenKind::SpecialPad),
            1 => TokenMeta::new(format!("<p{i}>"), TokenKind::Prompt),
            _ => TokenMeta::new(format!("w{}", rng.random_range(0..12)), TokenKind::QueryText),
        })
        .collect()
}

pub fn embedding(id: &str, rows: &[Vec<f64>], tokens: Option<Vec<TokenMeta>>) -> MultiVectorEmbedding {
    MultiVectorEmbedding::new(id, rows[0].len(), flat(rows), None, tokens).expect("valid embedding")
}

/// nDCG@k from the textbook definition: gain = grade, discount
/// 1/log2(position + 1), normalised by the DCG of the grades sorted
/// descending.
pub fn oracle_ndcg(ranked: &[&str], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, doc) in ranked.iter().take(k).enumerate() {
        let g = grades.get(*doc).copied().unwrap_or(0) as f64;
        dcg += g / ((i + 2) as f64).log2();
    }
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, g) in ideal.iter().take(k).enumerate() {
        idcg += *g as f64 / ((i + 2) as f64).log2();
    }
    dcg / idcg
}

pub fn oracle_recall(ranked: &[&str], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    let relevant: HashSet<&str> = grades.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d.as_str()).collect();
    let found = ranked.iter().take(k).filter(|d| relevant.contains(*d)).count();
    found as f64 / relevant.len() as f64
}

/// Hardest-negative softplus loss, computed the long way.
pub fn oracle_loss(s_pos: f64, s_negs: &[f64], tau: f64) -> f64 {
    let hardest = s_negs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pos = (s_pos / tau).exp();
    -(pos / (pos + (hardest / tau).exp())).ln()
}

#[cfg(feature = "cli")]
pub mod pipeline;
