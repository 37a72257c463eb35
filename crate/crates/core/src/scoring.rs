//! Relevance scoring: pooled cosine, masked MaxSim, and the contrastive loss.
//!
//! Rows are unit-norm after ingest, so every similarity here is a plain dot
//! product. MaxSim accumulates per-token maxima in `f32` and sums them in
//! `f64`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{pool, EmbeddingView, Pooling, TokenKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    Pooled,
    MaxSim,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(ScoreKind::Pooled),
            "maxsim" => Ok(ScoreKind::MaxSim),
            other => Err(Error::invalid(format!("unknown score kind `{other}`"))),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Pooled => "pooled",
            ScoreKind::MaxSim => "maxsim",
        })
    }
}

/// Which query tokens take part in the MaxSim sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    All,
    /// Special-token matching: pad (and by default prompt) tokens.
    StmOnly,
    /// Query-token matching: user text tokens.
    QtmOnly,
    QtmLexicalOnly,
    QtmNonlexicalOnly,
}

impl MaskKind {
    pub const ALL: [MaskKind; 5] = [
        MaskKind::All,
        MaskKind::StmOnly,
        MaskKind::QtmOnly,
        MaskKind::QtmLexicalOnly,
        MaskKind::QtmNonlexicalOnly,
    ];

    pub fn needs_ocr(self) -> bool {
        matches!(self, MaskKind::QtmLexicalOnly | MaskKind::QtmNonlexicalOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::All => "all",
            MaskKind::StmOnly => "stm",
            MaskKind::QtmOnly => "qtm",
            MaskKind::QtmLexicalOnly => "qtm-lex",
            MaskKind::QtmNonlexicalOnly => "qtm-nonlex",
        }
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MaskKind::All),
            "stm" | "stm_only" => Ok(MaskKind::StmOnly),
            "qtm" | "qtm_only" => Ok(MaskKind::QtmOnly),
            "qtm-lex" | "qtm_lexical_only" => Ok(MaskKind::QtmLexicalOnly),
            "qtm-nonlex" | "qtm_nonlexical_only" => Ok(MaskKind::QtmNonlexicalOnly),
            other => Err(Error::invalid(format!("unknown mask `{other}`"))),
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Score kind plus token mask. Masks other than `All` only exist for MaxSim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoreMode {
    kind: ScoreKind,
    mask: MaskKind,
}

impl ScoreMode {
    pub const POOLED: ScoreMode = ScoreMode {
        kind: ScoreKind::Pooled,
        mask: MaskKind::All,
    };
    pub const MAXSIM: ScoreMode = ScoreMode {
        kind: ScoreKind::MaxSim,
        mask: MaskKind::All,
    };

    pub fn new(kind: ScoreKind, mask: MaskKind) -> Result<Self> {
        if kind == ScoreKind::Pooled && mask != MaskKind::All {
            return Err(Error::invalid(format!(
                "mask `{mask}` requires maxsim scoring; pooled scoring has no per-token terms"
            )));
        }
        Ok(ScoreMode { kind, mask })
    }

    pub fn maxsim(mask: MaskKind) -> Self {
        ScoreMode {
            kind: ScoreKind::MaxSim,
            mask,
        }
    }

    pub fn kind(self) -> ScoreKind {
        self.kind
    }

    pub fn mask(self) -> MaskKind {
        self.mask
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.mask)
    }
}

/// One flag per query row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    active: Vec<bool>,
}

impl TokenMask {
    pub fn all(len: usize) -> Self {
        TokenMask {
            active: vec![true; len],
        }
    }

    pub fn from_flags(active: Vec<bool>) -> Self {
        TokenMask { active }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }
}

/// How a query token is judged to occur in a document's OCR text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LexicalMatch {
    #[default]
    Exact,
    /// Normalized strings within Levenshtein distance 1.
    Near,
}

/// Which token kinds count as special-token matching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StmScope {
    #[default]
    PadAndPrompt,
    PadOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskOptions {
    pub lexical: LexicalMatch,
    pub stm: StmScope,
}

/// Canonical form of a token for lexical comparison: lowercase, with
/// subword markers and surrounding punctuation removed.
pub fn normalize_token(text: &str) -> String {
    let mut s = text.trim();
    for marker in ["##", "\u{2581}", "\u{0120}", "@@"] {
        if let Some(rest) = s.strip_prefix(marker) {
            s = rest;
        }
    }
    if let Some(rest) = s.strip_suffix("@@") {
        s = rest;
    }
    s.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace() || c == '\u{2581}')
        .to_lowercase()
}

fn lexically_present(token: &str, doc_tokens: &HashSet<String>, mode: LexicalMatch) -> bool {
    let norm = normalize_token(token);
    if norm.is_empty() {
        return false;
    }
    match mode {
        LexicalMatch::Exact => doc_tokens.contains(&norm),
        LexicalMatch::Near => {
            doc_tokens.contains(&norm) || doc_tokens.iter().any(|d| strsim::levenshtein(d, &norm) <= 1)
        }
    }
}

/// Builds the token mask for `mask` over `query`.
///
/// `doc_ocr_tokens` must hold already-normalized strings and is required for
/// the lexical masks.
pub fn masks_for(
    query: EmbeddingView<'_>,
    mask: MaskKind,
    doc_ocr_tokens: Option<&HashSet<String>>,
    opts: MaskOptions,
) -> Result<TokenMask> {
    if mask == MaskKind::All {
        return Ok(TokenMask::all(query.len()));
    }
    let tokens = query
        .tokens
        .ok_or_else(|| Error::MissingTokens(query.id.to_owned()))?;
    let active = match mask {
        MaskKind::All => unreachable!(),
        MaskKind::StmOnly => tokens
            .iter()
            .map(|t| match t.kind {
                TokenKind::SpecialPad => true,
                TokenKind::Prompt => opts.stm == StmScope::PadAndPrompt,
                TokenKind::QueryText => false,
            })
            .collect(),
        MaskKind::QtmOnly => tokens.iter().map(|t| t.kind == TokenKind::QueryText).collect(),
        MaskKind::QtmLexicalOnly | MaskKind::QtmNonlexicalOnly => {
            let doc = doc_ocr_tokens.ok_or_else(|| {
                Error::invalid(format!("mask `{mask}` needs the document's OCR token set"))
            })?;
            let want_lexical = mask == MaskKind::QtmLexicalOnly;
            tokens
                .iter()
                .map(|t| {
                    t.kind == TokenKind::QueryText
                        && lexically_present(&t.text, doc, opts.lexical) == want_lexical
                })
                .collect()
        }
    };
    Ok(TokenMask { active })
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    let mut tail = 0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    lanes.iter().sum::<f32>() + tail
}

fn check_dims(query: EmbeddingView<'_>, doc: EmbeddingView<'_>) -> Result<()> {
    if query.dim != doc.dim {
        return Err(Error::Dimension {
            first_id: query.id.to_owned(),
            second_id: doc.id.to_owned(),
            expected: query.dim,
            found: doc.dim,
        });
    }
    Ok(())
}

/// Cosine of the two pooled vectors, in `[-1, 1]`.
pub fn score_pooled(query: EmbeddingView<'_>, doc: EmbeddingView<'_>) -> Result<f64> {
    score_pooled_with(query, doc, Pooling::Mean)
}

pub fn score_pooled_with(query: EmbeddingView<'_>, doc: EmbeddingView<'_>, pooling: Pooling) -> Result<f64> {
    check_dims(query, doc)?;
    let q = pool(query, pooling);
    let d = pool(doc, pooling);
    Ok(pooled_cosine(&q, &d))
}

pub(crate) fn pooled_cosine(q: &[f32], d: &[f32]) -> f64 {
    f64::from(dot(q, d)).clamp(-1.0, 1.0)
}

/// Late-interaction score with a flag for the degenerate empty mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxSimScore {
    pub value: f64,
    /// Set when no query token was active; `value` is then 0.
    pub empty_mask: bool,
}

/// Best-matching patch for each query token: `(similarity, patch index)`.
///
/// Ties keep the lowest patch index.
pub fn token_maxima(query: EmbeddingView<'_>, doc: EmbeddingView<'_>) -> Result<Vec<(f32, usize)>> {
    check_dims(query, doc)?;
    Ok(query.rows().map(|q| row_max(q, doc)).collect())
}

#[inline]
fn row_max(q: &[f32], doc: EmbeddingView<'_>) -> (f32, usize) {
    let mut best = f32::NEG_INFINITY;
    let mut arg = 0;
    for (j, d) in doc.rows().enumerate() {
        let s = dot(q, d);
        if s > best {
            best = s;
            arg = j;
        }
    }
    (best, arg)
}

/// Sum over active query tokens of the max similarity over document rows.
pub fn score_maxsim(query: EmbeddingView<'_>, doc: EmbeddingView<'_>, mask: &TokenMask) -> Result<MaxSimScore> {
    check_dims(query, doc)?;
    if mask.len() != query.len() {
        return Err(Error::invalid(format!(
            "mask has {} entries but query `{}` has {} rows",
            mask.len(),
            query.id,
            query.len()
        )));
    }
    let mut total = 0f64;
    let mut any = false;
    for (i, q) in query.rows().enumerate() {
        if mask.is_active(i) {
            any = true;
            total += f64::from(row_max(q, doc).0);
        }
    }
    Ok(MaxSimScore {
        value: total,
        empty_mask: !any,
    })
}

/// Unmasked MaxSim.
pub fn maxsim(query: EmbeddingView<'_>, doc: EmbeddingView<'_>) -> Result<f64> {
    score_maxsim(query, doc, &TokenMask::all(query.len())).map(|s| s.value)
}

fn check_loss_args(s_negs: &[f64], tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    s_negs
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid("contrastive loss needs at least one negative score"))
}

/// Pairwise contrastive loss against the hardest negative:
/// `-log(e^{s+/τ} / (e^{s+/τ} + e^{s-/τ}))`, i.e. `softplus((s- - s+)/τ)`.
pub fn contrastive_loss(s_pos: f64, s_negs: &[f64], tau: f64) -> Result<f64> {
    let hardest = check_loss_args(s_negs, tau)?;
    let margin = (hardest - s_pos) / tau;
    Ok(softplus(margin))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveGrad {
    pub d_pos: f64,
    pub d_hardest_neg: f64,
    /// Index into `s_negs` of the negative receiving the gradient (first
    /// occurrence of the maximum); every other negative gets zero.
    pub hardest_index: usize,
}

pub fn contrastive_loss_grad(s_pos: f64, s_negs: &[f64], tau: f64) -> Result<ContrastiveGrad> {
    let hardest = check_loss_args(s_negs, tau)?;
    let hardest_index = s_negs.iter().position(|&s| s == hardest).unwrap_or(0);
    // 1 - p where p is the softmax weight of the positive
    let q = sigmoid((hardest - s_pos) / tau);
    Ok(ContrastiveGrad {
        d_pos: -q / tau,
        d_hardest_neg: q / tau,
        hardest_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MultiVectorEmbedding, TokenMeta};
    use approx::assert_abs_diff_eq;

    fn emb(rows: &[Vec<f32>]) -> MultiVectorEmbedding {
        MultiVectorEmbedding::from_rows("e", rows).unwrap()
    }

    #[test]
    fn pooled_examples() {
        let q = emb(&[vec![1.0, 0.0]]);
        assert_abs_diff_eq!(score_pooled(q.view(), emb(&[vec![1.0, 0.0]]).view()).unwrap(), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(score_pooled(q.view(), emb(&[vec![0.0, 1.0]]).view()).unwrap(), 0.0, epsilon = 1e-7);
        let q2 = emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = emb(&[vec![0.6, 0.8]]);
        // (0.6 + 0.8) / sqrt(2)
        assert_abs_diff_eq!(score_pooled(q2.view(), d.view()).unwrap(), 0.98995, epsilon = 1e-5);
    }

    #[test]
    fn pooled_dimension_mismatch() {
        let q = emb(&[vec![1.0, 0.0]]);
        let d = emb(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(score_pooled(q.view(), d.view()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn maxsim_examples() {
        let q = emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = emb(&[vec![1.0, 0.0], vec![0.6, 0.8]]);
        assert_abs_diff_eq!(maxsim(q.view(), d.view()).unwrap(), 1.8, epsilon = 1e-6);

        let one = emb(&[vec![0.0, 1.0]]);
        assert_abs_diff_eq!(maxsim(one.view(), one.view()).unwrap(), 1.0, epsilon = 1e-7);

        let dup = emb(&[vec![0.3, 0.7], vec![0.3, 0.7]]);
        let single = emb(&[vec![0.3, 0.7]]);
        assert_eq!(maxsim(dup.view(), d.view()).unwrap(), 2.0 * maxsim(single.view(), d.view()).unwrap());
    }

    #[test]
    fn empty_mask_scores_zero_with_flag() {
        let q = emb(&[vec![1.0, 0.0]]);
        let s = score_maxsim(q.view(), q.view(), &TokenMask::from_flags(vec![false])).unwrap();
        assert_eq!(s, MaxSimScore { value: 0.0, empty_mask: true });
    }

    #[test]
    fn mask_length_checked() {
        let q = emb(&[vec![1.0, 0.0]]);
        assert!(score_maxsim(q.view(), q.view(), &TokenMask::all(2)).is_err());
    }

    #[test]
    fn pooled_rejects_token_masks() {
        assert!(ScoreMode::new(ScoreKind::Pooled, MaskKind::QtmOnly).is_err());
        assert!(ScoreMode::new(ScoreKind::MaxSim, MaskKind::QtmOnly).is_ok());
    }

    fn tagged_query() -> MultiVectorEmbedding {
        emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, -1.0]])
            .with_tokens(vec![
                TokenMeta::new("Query:", TokenKind::Prompt),
                TokenMeta::new("health", TokenKind::QueryText),
                TokenMeta::new("provide", TokenKind::QueryText),
                TokenMeta::new("<|endoftext|>", TokenKind::SpecialPad),
            ])
            .unwrap()
    }

    #[test]
    fn kind_masks() {
        let q = tagged_query();
        let o = MaskOptions::default();
        let stm = masks_for(q.view(), MaskKind::StmOnly, None, o).unwrap();
        assert_eq!(stm.flags(), &[true, false, false, true]);
        let qtm = masks_for(q.view(), MaskKind::QtmOnly, None, o).unwrap();
        assert_eq!(qtm.flags(), &[false, true, true, false]);
        let pad_only = MaskOptions { stm: StmScope::PadOnly, ..o };
        assert_eq!(masks_for(q.view(), MaskKind::StmOnly, None, pad_only).unwrap().flags(), &[false, false, false, true]);
    }

    #[test]
    fn lexical_masks() {
        let q = tagged_query();
        let doc: HashSet<String> = ["health", "team"].iter().map(|s| s.to_string()).collect();
        let o = MaskOptions::default();
        let lex = masks_for(q.view(), MaskKind::QtmLexicalOnly, Some(&doc), o).unwrap();
        assert_eq!(lex.flags(), &[false, true, false, false]);
        let non = masks_for(q.view(), MaskKind::QtmNonlexicalOnly, Some(&doc), o).unwrap();
        assert_eq!(non.flags(), &[false, false, true, false]);
    }

    #[test]
    fn lexical_mask_requires_ocr_and_tokens() {
        let q = tagged_query();
        assert!(masks_for(q.view(), MaskKind::QtmLexicalOnly, None, MaskOptions::default()).is_err());
        let bare = emb(&[vec![1.0]]);
        assert!(matches!(
            masks_for(bare.view(), MaskKind::QtmOnly, None, MaskOptions::default()),
            Err(Error::MissingTokens(_))
        ));
    }

    #[test]
    fn near_match_accepts_one_edit() {
        let doc: HashSet<String> = ["services".to_string()].into_iter().collect();
        assert!(!lexically_present("service", &doc, LexicalMatch::Exact));
        assert!(lexically_present("service", &doc, LexicalMatch::Near));
        assert!(!lexically_present("serve", &doc, LexicalMatch::Near));
    }

    #[test]
    fn token_normalization() {
        assert_eq!(normalize_token("##Health,"), "health");
        assert_eq!(normalize_token("\u{2581}Team"), "team");
        assert_eq!(normalize_token("\u{0120}works."), "works");
        assert_eq!(normalize_token("(U.S.)"), "u.s");
        assert_eq!(normalize_token("..."), "");
    }

    #[test]
    fn loss_examples() {
        assert_abs_diff_eq!(contrastive_loss(0.3, &[0.3], 1.0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        // log(1 + e^-0.5)
        assert_abs_diff_eq!(contrastive_loss(1.0, &[0.5, 0.2], 1.0).unwrap(), 0.474077, epsilon = 1e-6);
        let tiny = contrastive_loss(10.0, &[-10.0], 1.0).unwrap();
        assert!(tiny > 0.0 && (tiny - 2.061153622e-9).abs() < 1e-15, "{tiny}");
        assert!(contrastive_loss(-1e6, &[1e6], 1e-3).unwrap().is_finite());
    }

    #[test]
    fn loss_errors() {
        assert!(contrastive_loss(1.0, &[], 1.0).is_err());
        assert!(contrastive_loss(1.0, &[0.0], 0.0).is_err());
        assert!(contrastive_loss_grad(1.0, &[0.0], -1.0).is_err());
    }

    #[test]
    fn grad_examples() {
        let g = contrastive_loss_grad(0.7, &[0.7], 1.0).unwrap();
        assert_abs_diff_eq!(g.d_pos, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.d_hardest_neg, 0.5, epsilon = 1e-12);
        // 1 - sigmoid(0.5)
        let g = contrastive_loss_grad(1.0, &[0.2, 0.5], 1.0).unwrap();
        assert_abs_diff_eq!(g.d_pos, -0.377541, epsilon = 1e-6);
        assert_abs_diff_eq!(g.d_hardest_neg, 0.377541, epsilon = 1e-6);
        assert_eq!(g.hardest_index, 1);
    }
}
