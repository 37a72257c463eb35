//! Late-interaction retrieval over pre-computed multi-vector embeddings.
//!
//! Queries are sequences of token vectors and documents are sequences of
//! page-patch vectors. The crate scores them either by comparing pooled
//! single vectors or by late interaction (MaxSim), retrieves exhaustively,
//! evaluates rankings, and runs the attribution analyses built on top:
//! token-kind and lexical masking, visual coverage statistics with
//! Mann-Whitney tests, and similarity-map export.

pub mod analysis;
#[cfg(feature = "cli")]
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod scoring;
pub mod search;
pub mod synth;

pub use corpus::{pool, Corpus, CorpusBuilder, EmbeddingView, Grid, MultiVectorEmbedding, Pooling, TokenKind, TokenMeta};
pub use error::{Error, Result};
pub use evaluation::{evaluate, ndcg_at_k, recall_at_k, Qrels};
pub use format::{load_corpus, write_corpus};
pub use scoring::{
    contrastive_loss, contrastive_loss_grad, masks_for, maxsim, score_maxsim, score_pooled, MaskKind, ScoreKind,
    ScoreMode, TokenMask,
};
pub use search::{batch_search, search, OcrIndex, Ranking};
