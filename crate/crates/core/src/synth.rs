//! Deterministic synthetic corpora with planted relevance.
//!
//! Randomness comes from ChaCha8 seeded with [`SynthSpec::seed`]; every
//! document and query draws from its own ChaCha stream, so output is
//! identical across platforms and independent of thread scheduling.
//!
//! Each query owns exactly one relevant document. That document contains
//! (noisy) copies of a fraction of the query's text-token vectors; the rest
//! of its patches are random unit vectors. Pad tokens share one fixed
//! vector, prompt tokens another. Planted query words are written into the
//! relevant document's OCR page so they count as lexical matches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::coverage::{GrayRaster, OcrBox, OcrPage};
use crate::corpus::{pool, Corpus, CorpusBuilder, Grid, MultiVectorEmbedding, Pooling, TokenKind, TokenMeta};
use crate::error::{Error, Result};
use crate::evaluation::Qrels;
use crate::search::OcrIndex;

pub const PAD_TEXT: &str = "<|endoftext|>";

const GLOBAL_STREAM: u64 = 0;
const DOC_STREAM: u64 = 1 << 32;
const QUERY_STREAM: u64 = 2 << 32;

/// How the planted structure is laid out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Construction {
    #[default]
    Random,
    /// The relevant document's unplanted patches all point at the antipode
    /// of the query's pooled vector, so pooled scoring ranks it low while
    /// MaxSim still finds every planted token.
    PooledAdversarial,
    /// Pad and prompt vectors are basis vectors that no document patch or
    /// query text token touches; relevance is carried by text tokens only.
    OrthogonalSpecial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub num_docs: usize,
    pub num_queries: usize,
    /// Inclusive range of patches per document.
    pub patches_per_doc: (usize, usize),
    /// Inclusive range of text tokens per query.
    pub tokens_per_query: (usize, usize),
    pub prompt_tokens: usize,
    pub pad_tokens: usize,
    pub dim: usize,
    /// Fraction of each query's text tokens copied into its relevant doc.
    pub planted_relevance: f64,
    /// Norm of the spherical perturbation applied to planted copies.
    pub noise: f64,
    pub construction: Construction,
    pub doc_prefix: String,
    /// Page size in pixels for OCR pages and rasters.
    pub page: (u32, u32),
    /// Also emit OCR pages and page rasters.
    pub with_pages: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            num_docs: 50,
            num_queries: 10,
            patches_per_doc: (32, 32),
            tokens_per_query: (6, 6),
            prompt_tokens: 2,
            pad_tokens: 4,
            dim: 32,
            planted_relevance: 1.0,
            noise: 0.0,
            construction: Construction::Random,
            doc_prefix: "d".into(),
            page: (64, 64),
            with_pages: true,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 8 {
            return Err(Error::invalid(format!("dim {} is too small to plant structure (need >= 8)", self.dim)));
        }
        if self.num_queries > self.num_docs {
            return Err(Error::invalid("each query needs its own relevant document: num_queries > num_docs"));
        }
        let (pmin, pmax) = self.patches_per_doc;
        let (tmin, tmax) = self.tokens_per_query;
        if pmin == 0 || pmin > pmax || tmin == 0 || tmin > tmax {
            return Err(Error::invalid("size ranges must be nonempty and start at 1 or more"));
        }
        if !(0.0..=1.0).contains(&self.planted_relevance) || self.noise.is_nan() || self.noise < 0.0 {
            return Err(Error::invalid("planted_relevance must be in [0, 1] and noise non-negative"));
        }
        let planted_max = planted_count(tmax, self.planted_relevance);
        let needed = match self.construction {
            Construction::PooledAdversarial => 2 * planted_max + 1,
            _ => planted_max,
        };
        if self.num_queries > 0 && pmin < needed {
            return Err(Error::invalid(format!(
                "{pmin} patches cannot hold {needed} planted rows for this construction"
            )));
        }
        if self.page.0 < 16 || self.page.1 < 16 {
            return Err(Error::invalid("page must be at least 16x16 pixels"));
        }
        Ok(())
    }

    pub fn doc_id(&self, i: usize) -> String {
        format!("{}{i:06}", self.doc_prefix)
    }
}

fn planted_count(tokens: usize, fraction: f64) -> usize {
    ((tokens as f64) * fraction).round() as usize
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    pub queries: Corpus,
    pub qrels: Qrels,
    pub pages: Vec<OcrPage>,
    pub rasters: Vec<GrayRaster>,
}

impl SynthData {
    pub fn ocr_index(&self) -> OcrIndex {
        crate::analysis::ocr_index(&self.pages)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dimensions that carry content; the first two are reserved in the
/// orthogonal construction.
fn content_dims(spec: &SynthSpec) -> std::ops::Range<usize> {
    match spec.construction {
        Construction::OrthogonalSpecial => 2..spec.dim,
        _ => 0..spec.dim,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, dims: std::ops::Range<usize>) -> Vec<f32> {
    loop {
        let mut v = vec![0f64; dim];
        for x in &mut v[dims.clone()] {
            *x = rng.sample(StandardNormal);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, v: &[f32], noise: f64, dims: std::ops::Range<usize>) -> Vec<f32> {
    if noise == 0.0 {
        return v.to_vec();
    }
    let u = random_unit(rng, v.len(), dims);
    let w: Vec<f64> = v.iter().zip(&u).map(|(&a, &b)| f64::from(a) + noise * f64::from(b)).collect();
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter().map(|x| (x / n) as f32).collect()
}

fn basis(dim: usize, axis: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim];
    v[axis] = 1.0;
    v
}

/// Grid with as square a shape as the patch count allows.
fn grid_for(n: usize) -> Grid {
    let mut cols = (n as f64).sqrt().ceil() as usize;
    while !n.is_multiple_of(cols) {
        cols += 1;
    }
    Grid::new((n / cols) as u32, cols as u32)
}

struct QueryPlan {
    embedding: MultiVectorEmbedding,
    /// Text-token rows and words, in order.
    text_rows: Vec<Vec<f32>>,
    text_words: Vec<String>,
}

fn make_query(spec: &SynthSpec, q: usize, pad: &[f32], prompts: &[Vec<f32>]) -> Result<QueryPlan> {
    let mut rng = stream_rng(spec.seed, QUERY_STREAM | q as u64);
    let n_text = rng.random_range(spec.tokens_per_query.0..=spec.tokens_per_query.1);
    let mut data = Vec::new();
    let mut tokens = Vec::new();
    for (j, p) in prompts.iter().enumerate() {
        data.extend_from_slice(p);
        tokens.push(TokenMeta::new(format!("<prompt{j}>"), TokenKind::Prompt));
    }
    let mut text_rows = Vec::with_capacity(n_text);
    let mut text_words = Vec::with_capacity(n_text);
    for t in 0..n_text {
        let row = random_unit(&mut rng, spec.dim, content_dims(spec));
        data.extend_from_slice(&row);
        let word = format!("term{q}x{t}");
        tokens.push(TokenMeta::new(word.clone(), TokenKind::QueryText));
        text_rows.push(row);
        text_words.push(word);
    }
    for _ in 0..spec.pad_tokens {
        data.extend_from_slice(pad);
        tokens.push(TokenMeta::new(PAD_TEXT, TokenKind::SpecialPad));
    }
    let embedding = MultiVectorEmbedding::new(format!("q{q:05}"), spec.dim, data, None, Some(tokens))?;
    Ok(QueryPlan {
        embedding,
        text_rows,
        text_words,
    })
}

struct DocOut {
    embedding: MultiVectorEmbedding,
    page: Option<(OcrPage, GrayRaster)>,
}

fn make_doc(spec: &SynthSpec, d: usize, planted: Option<&QueryPlan>) -> Result<DocOut> {
    let mut rng = stream_rng(spec.seed, DOC_STREAM | d as u64);
    let n = rng.random_range(spec.patches_per_doc.0..=spec.patches_per_doc.1);
    let mut rows: Vec<Vec<f32>> = (0..n).map(|_| random_unit(&mut rng, spec.dim, content_dims(spec))).collect();
    let mut planted_words = Vec::new();
    if let Some(plan) = planted {
        let m = planted_count(plan.text_rows.len(), spec.planted_relevance);
        let mut slots: Vec<usize> = (0..n).collect();
        // partial Fisher-Yates: the first m slots are the planted positions
        for i in 0..m {
            let j = rng.random_range(i..n);
            slots.swap(i, j);
        }
        for (slot, row) in slots.iter().zip(plan.text_rows.iter().take(m)) {
            rows[*slot] = perturb(&mut rng, row, spec.noise, content_dims(spec));
        }
        if spec.construction == Construction::PooledAdversarial {
            let pooled = pool(plan.embedding.view(), Pooling::Mean);
            let antipode: Vec<f32> = pooled.iter().map(|v| -v).collect();
            for &slot in &slots[m..] {
                rows[slot] = antipode.clone();
            }
        }
        planted_words = plan.text_words[..m].to_vec();
    }
    let id = spec.doc_id(d);
    let data = rows.into_iter().flatten().collect();
    let embedding = MultiVectorEmbedding::new(id.clone(), spec.dim, data, Some(grid_for(n)), None)?;
    let page = spec
        .with_pages
        .then(|| render_page(spec, &id, &mut rng, &planted_words));
    Ok(DocOut { embedding, page })
}

/// Lays words out as one box each in the top half of the page and puts a
/// grey figure block in the bottom half. Ink covers three quarters of each
/// box; the rest of the box stays background.
fn render_page(spec: &SynthSpec, id: &str, rng: &mut ChaCha8Rng, planted: &[String]) -> (OcrPage, GrayRaster) {
    let (w, h) = spec.page;
    let mut raster = GrayRaster::filled(w, h, 255);
    let mut words: Vec<String> = planted.to_vec();
    let filler = rng.random_range(2..10);
    for _ in 0..filler {
        words.push(format!("fill{}", rng.random_range(0..500)));
    }
    let line_h = 8u32;
    let text_bottom = h / 2;
    let (mut x, mut y) = (1u32, 1u32);
    let mut boxes = Vec::new();
    for word in words {
        let bw = (2 * word.len() as u32).clamp(4, w - 2);
        if x + bw > w - 1 {
            x = 1;
            y += line_h;
        }
        if y + 6 > text_bottom {
            break;
        }
        for yy in y..y + 6 {
            for xx in x..x + bw {
                if (xx + yy) % 4 != 0 {
                    raster.set(xx, yy, 0);
                }
            }
        }
        boxes.push(OcrBox {
            x: f64::from(x),
            y: f64::from(y),
            w: f64::from(bw),
            h: 6.0,
            text: word,
        });
        x += bw + 2;
    }
    let fig_w = rng.random_range(w / 3..=w - 2);
    let fig_h = rng.random_range(h / 4..=h / 2 - 2);
    let fig_x = rng.random_range(1..=w - 1 - fig_w);
    raster.fill_rect(fig_x, h / 2 + 1, fig_w, fig_h, 128);
    let page = OcrPage {
        doc_id: id.to_owned(),
        width: w,
        height: h,
        boxes,
    };
    (page, raster)
}

#[cfg(feature = "parallel")]
fn map_docs<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_docs<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// Generates corpus, queries (with token metadata), qrels and, when
/// requested, OCR pages with matching rasters.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut global = stream_rng(spec.seed, GLOBAL_STREAM);
    let (pad, prompt) = match spec.construction {
        Construction::OrthogonalSpecial => (basis(spec.dim, 0), basis(spec.dim, 1)),
        _ => (
            random_unit(&mut global, spec.dim, 0..spec.dim),
            random_unit(&mut global, spec.dim, 0..spec.dim),
        ),
    };
    let prompts: Vec<Vec<f32>> = (0..spec.prompt_tokens)
        .map(|j| {
            if j == 0 || spec.construction == Construction::OrthogonalSpecial {
                prompt.clone()
            } else {
                random_unit(&mut global, spec.dim, 0..spec.dim)
            }
        })
        .collect();

    let plans = (0..spec.num_queries)
        .map(|q| make_query(spec, q, &pad, &prompts))
        .collect::<Result<Vec<_>>>()?;
    // query q owns document relevant_doc(q); spread evenly over the corpus
    let relevant_doc = |q: usize| q * spec.num_docs / spec.num_queries.max(1);
    let mut owner = vec![None; spec.num_docs];
    for q in 0..spec.num_queries {
        owner[relevant_doc(q)] = Some(q);
    }

    let docs = map_docs(spec.num_docs, |d| make_doc(spec, d, owner[d].map(|q| &plans[q])))?;

    let mut qrels = Qrels::new();
    for (q, plan) in plans.iter().enumerate() {
        qrels.insert(plan.embedding.id(), spec.doc_id(relevant_doc(q)), 1);
    }
    let total_rows = docs.iter().map(|d| d.embedding.len()).sum();
    let mut builder = CorpusBuilder::with_capacity(spec.dim, docs.len(), total_rows);
    let mut pages = Vec::new();
    let mut rasters = Vec::new();
    for doc in docs {
        builder.push(doc.embedding)?;
        if let Some((page, raster)) = doc.page {
            pages.push(page);
            rasters.push(raster);
        }
    }
    let queries = Corpus::build(spec.dim, plans.into_iter().map(|p| p.embedding))?;
    Ok(SynthData {
        corpus: builder.finish(),
        queries,
        qrels,
        pages,
        rasters,
    })
}
