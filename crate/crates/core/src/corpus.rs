//! Multi-vector embedding data model and the immutable [`Corpus`].
//!
//! Every row is L2-normalized at ingest, so cosine similarity reduces to a
//! dot product everywhere downstream. A corpus stores all rows of all
//! entries in one contiguous buffer and keeps a pooled single-vector sidecar
//! next to it for bi-encoder scoring.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows whose norm is already this close to 1 are stored untouched, which
/// keeps write/load round trips bit-exact.
const UNIT_NORM_SLACK: f64 = 1e-6;
const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    QueryText,
    SpecialPad,
    Prompt,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::QueryText => "query_text",
            TokenKind::SpecialPad => "special_pad",
            TokenKind::Prompt => "prompt",
        }
    }
}

/// Surface string and role of one query token row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMeta {
    pub text: String,
    pub kind: TokenKind,
}

impl TokenMeta {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        TokenMeta {
            text: text.into(),
            kind,
        }
    }
}

/// Patch layout of a document page, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: u32,
    pub cols: u32,
}

impl Grid {
    pub fn new(rows: u32, cols: u32) -> Self {
        Grid { rows, cols }
    }

    pub fn cells(self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// (row, col) of a row-major patch index.
    pub fn position(self, index: usize) -> (u32, u32) {
        let cols = self.cols as usize;
        ((index / cols) as u32, (index % cols) as u32)
    }
}

/// How a multi-vector embedding is compressed to a single vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Pooling {
    /// Row-wise mean, renormalized.
    #[default]
    Mean,
    /// The first row, CLS style.
    First,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "first" | "cls" => Ok(Pooling::First),
            other => Err(Error::invalid(format!("unknown pooling `{other}`"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::First => "first",
        })
    }
}

/// An owned query or document: `n` unit-norm rows of width `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVectorEmbedding {
    id: String,
    dim: usize,
    data: Vec<f32>,
    grid: Option<Grid>,
    tokens: Option<Vec<TokenMeta>>,
}

impl MultiVectorEmbedding {
    /// Validates and normalizes `data` (row-major, `n × dim`).
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        mut data: Vec<f32>,
        grid: Option<Grid>,
        tokens: Option<Vec<TokenMeta>>,
    ) -> Result<Self> {
        let id = id.into();
        if dim == 0 {
            return Err(Error::InvalidRecord {
                id,
                message: "dimension must be at least 1".into(),
            });
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidRecord {
                id,
                message: format!("{} values do not form rows of width {dim}", data.len()),
            });
        }
        let n = data.len() / dim;
        check_layout(&id, n, grid, tokens.as_deref())?;
        normalize_rows(&id, dim, &mut data)?;
        Ok(MultiVectorEmbedding {
            id,
            dim,
            data,
            grid,
            tokens,
        })
    }

    /// Convenience constructor from explicit rows.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let id = id.into();
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((row, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::InvalidRecord {
                id,
                message: format!("row {row} has width {} but row 0 has {dim}", rows[row].len()),
            });
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(id, dim, data, None, None)
    }

    pub fn with_grid(mut self, grid: Grid) -> Result<Self> {
        check_layout(&self.id, self.len(), Some(grid), self.tokens.as_deref())?;
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn with_tokens(mut self, tokens: Vec<TokenMeta>) -> Result<Self> {
        check_layout(&self.id, self.len(), self.grid, Some(&tokens))?;
        self.tokens = Some(tokens);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    pub fn tokens(&self) -> Option<&[TokenMeta]> {
        self.tokens.as_deref()
    }

    pub fn view(&self) -> EmbeddingView<'_> {
        EmbeddingView {
            id: &self.id,
            dim: self.dim,
            data: &self.data,
            grid: self.grid,
            tokens: self.tokens.as_deref(),
        }
    }
}

/// Borrowed view of one embedding, either owned or inside a [`Corpus`].
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingView<'a> {
    pub id: &'a str,
    pub dim: usize,
    pub data: &'a [f32],
    pub grid: Option<Grid>,
    pub tokens: Option<&'a [TokenMeta]>,
}

impl<'a> EmbeddingView<'a> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_owned(&self) -> MultiVectorEmbedding {
        MultiVectorEmbedding {
            id: self.id.to_owned(),
            dim: self.dim,
            data: self.data.to_vec(),
            grid: self.grid,
            tokens: self.tokens.map(<[TokenMeta]>::to_vec),
        }
    }
}

fn check_layout(id: &str, n: usize, grid: Option<Grid>, tokens: Option<&[TokenMeta]>) -> Result<()> {
    if let Some(grid) = grid {
        if grid.cells() != n {
            return Err(Error::InvalidRecord {
                id: id.to_owned(),
                message: format!("grid {}x{} does not cover {n} rows", grid.rows, grid.cols),
            });
        }
    }
    if let Some(tokens) = tokens {
        if tokens.len() != n {
            return Err(Error::InvalidRecord {
                id: id.to_owned(),
                message: format!("{} token entries for {n} rows", tokens.len()),
            });
        }
        if let Some(row) = tokens
            .iter()
            .position(|t| t.kind == TokenKind::SpecialPad && t.text.is_empty())
        {
            return Err(Error::InvalidRecord {
                id: id.to_owned(),
                message: format!("pad token at row {row} has an empty surface string"),
            });
        }
    }
    Ok(())
}

fn normalize_rows(id: &str, dim: usize, data: &mut [f32]) -> Result<()> {
    for (row, values) in data.chunks_exact_mut(dim).enumerate() {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                id: id.to_owned(),
                row,
            });
        }
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm < MIN_NORM {
            return Err(Error::ZeroNorm {
                id: id.to_owned(),
                row,
            });
        }
        if (norm - 1.0).abs() > UNIT_NORM_SLACK {
            for v in values.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
    }
    Ok(())
}

/// Compress an embedding to one unit vector.
pub fn pool(embedding: EmbeddingView<'_>, pooling: Pooling) -> Vec<f32> {
    match pooling {
        Pooling::First => embedding.row(0).to_vec(),
        // rows are already unit-norm, so the mean of one row is that row
        Pooling::Mean if embedding.len() == 1 => embedding.row(0).to_vec(),
        Pooling::Mean => {
            let mut acc = vec![0f64; embedding.dim];
            for row in embedding.rows() {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += f64::from(v);
                }
            }
            let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
            // Rows that cancel exactly have no direction; fall back to the
            // first row so the pooled vector stays unit-norm.
            if norm < MIN_NORM {
                return embedding.row(0).to_vec();
            }
            acc.iter().map(|a| (a / norm) as f32).collect()
        }
    }
}

/// Immutable, id-addressed collection of embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    ids: Vec<String>,
    /// Row offset of entry `i`; `offsets[len]` is the total row count.
    offsets: Vec<usize>,
    data: Vec<f32>,
    grids: Vec<Option<Grid>>,
    tokens: Vec<Option<Vec<TokenMeta>>>,
    pooling: Pooling,
    pooled: Vec<f32>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn empty(dim: usize) -> Self {
        CorpusBuilder::new(dim).finish()
    }

    /// Builds a corpus from owned embeddings, preserving order.
    pub fn build(dim: usize, entries: impl IntoIterator<Item = MultiVectorEmbedding>) -> Result<Self> {
        let mut builder = CorpusBuilder::new(dim);
        for entry in entries {
            builder.push(entry)?;
        }
        Ok(builder.finish())
    }

    /// Recomputes the pooled sidecar with a different pooling operator.
    pub fn with_pooling(mut self, pooling: Pooling) -> Self {
        self.pooling = pooling;
        self.pooled = compute_pooled(&self, pooling);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn get(&self, index: usize) -> EmbeddingView<'_> {
        let start = self.offsets[index] * self.dim;
        let end = self.offsets[index + 1] * self.dim;
        EmbeddingView {
            id: &self.ids[index],
            dim: self.dim,
            data: &self.data[start..end],
            grid: self.grids[index],
            tokens: self.tokens[index].as_deref(),
        }
    }

    pub fn by_id(&self, id: &str) -> Option<EmbeddingView<'_>> {
        self.position(id).map(|i| self.get(i))
    }

    pub fn pooled(&self, index: usize) -> &[f32] {
        &self.pooled[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = EmbeddingView<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Attaches token metadata by id. Every listed id must exist and carry
    /// one token per row.
    pub fn attach_tokens(mut self, tokens: HashMap<String, Vec<TokenMeta>>) -> Result<Self> {
        for (id, meta) in tokens {
            let index = self.position(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            let n = self.offsets[index + 1] - self.offsets[index];
            check_layout(&id, n, None, Some(&meta))?;
            self.tokens[index] = Some(meta);
        }
        Ok(self)
    }

    /// A new corpus with the first `take` entries of `self` followed by the
    /// first `extra` entries of `other`.
    pub fn concat_prefix(&self, take: usize, other: &Corpus, extra: usize) -> Result<Corpus> {
        if other.dim != self.dim && extra > 0 {
            return Err(Error::Dimension {
                first_id: self.ids.first().cloned().unwrap_or_default(),
                second_id: other.ids.first().cloned().unwrap_or_default(),
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut builder = CorpusBuilder::new(self.dim);
        for view in self.iter().take(take).chain(other.iter().take(extra)) {
            builder.push_view(view)?;
        }
        Ok(builder.finish().with_pooling(self.pooling))
    }
}

/// Incremental, single-writer construction of a [`Corpus`].
#[derive(Debug)]
pub struct CorpusBuilder {
    dim: usize,
    ids: Vec<String>,
    offsets: Vec<usize>,
    data: Vec<f32>,
    grids: Vec<Option<Grid>>,
    tokens: Vec<Option<Vec<TokenMeta>>>,
    id_index: HashMap<String, usize>,
}

impl CorpusBuilder {
    pub fn new(dim: usize) -> Self {
        CorpusBuilder {
            dim,
            ids: Vec::new(),
            offsets: vec![0],
            data: Vec::new(),
            grids: Vec::new(),
            tokens: Vec::new(),
            id_index: HashMap::new(),
        }
    }

    pub fn with_capacity(dim: usize, entries: usize, rows: usize) -> Self {
        let mut builder = Self::new(dim);
        builder.ids.reserve(entries);
        builder.data.reserve(rows * dim);
        builder
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, entry: MultiVectorEmbedding) -> Result<()> {
        self.push_view(entry.view())
    }

    fn push_view(&mut self, view: EmbeddingView<'_>) -> Result<()> {
        if view.dim != self.dim {
            return Err(Error::Dimension {
                first_id: self.ids.first().cloned().unwrap_or_else(|| "<corpus>".into()),
                second_id: view.id.to_owned(),
                expected: self.dim,
                found: view.dim,
            });
        }
        self.register_id(view.id)?;
        self.data.extend_from_slice(view.data);
        self.finish_entry(view.id, view.len(), view.grid, view.tokens.map(<[TokenMeta]>::to_vec))
    }

    /// Appends raw (possibly unnormalized) values; validation and
    /// normalization happen in place.
    pub fn push_raw(&mut self, id: &str, values: &[f32], grid: Option<Grid>) -> Result<()> {
        if values.is_empty() || !values.len().is_multiple_of(self.dim) {
            return Err(Error::InvalidRecord {
                id: id.to_owned(),
                message: format!("{} values do not form rows of width {}", values.len(), self.dim),
            });
        }
        let n = values.len() / self.dim;
        check_layout(id, n, grid, None)?;
        self.register_id(id)?;
        let start = self.data.len();
        self.data.extend_from_slice(values);
        if let Err(e) = normalize_rows(id, self.dim, &mut self.data[start..]) {
            self.data.truncate(start);
            self.id_index.remove(id);
            return Err(e);
        }
        self.finish_entry(id, n, grid, None)
    }

    fn register_id(&mut self, id: &str) -> Result<()> {
        if self.id_index.contains_key(id) {
            return Err(Error::DuplicateId(id.to_owned()));
        }
        self.id_index.insert(id.to_owned(), self.ids.len());
        Ok(())
    }

    fn finish_entry(
        &mut self,
        id: &str,
        n: usize,
        grid: Option<Grid>,
        tokens: Option<Vec<TokenMeta>>,
    ) -> Result<()> {
        self.ids.push(id.to_owned());
        let last = *self.offsets.last().unwrap();
        self.offsets.push(last + n);
        self.grids.push(grid);
        self.tokens.push(tokens);
        Ok(())
    }

    pub fn finish(self) -> Corpus {
        let mut corpus = Corpus {
            dim: self.dim,
            ids: self.ids,
            offsets: self.offsets,
            data: self.data,
            grids: self.grids,
            tokens: self.tokens,
            pooling: Pooling::Mean,
            pooled: Vec::new(),
            id_index: self.id_index,
        };
        corpus.pooled = compute_pooled(&corpus, Pooling::Mean);
        corpus
    }
}

fn compute_pooled(corpus: &Corpus, pooling: Pooling) -> Vec<f32> {
    let mut pooled = Vec::with_capacity(corpus.len() * corpus.dim);
    for view in corpus.iter() {
        pooled.extend(pool(view, pooling));
    }
    pooled
}
