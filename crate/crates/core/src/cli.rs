//! The `vdr` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.
//! Machine-readable outputs go to files; a short human summary goes to
//! stdout.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    self, background_mask, feature_significance, features_by_doc, matching_ablation, partition_check, split_groups,
    Alternative, Bitmap, Feature, GrayRaster, DEFAULT_BG_THRESHOLD,
};
use crate::corpus::{Corpus, Pooling};
use crate::error::{Error, Result};
use crate::evaluation::{bench_scaling, evaluate, read_qrels, write_eval_report, write_qrels, BenchOptions};
use crate::format::{load_corpus, load_queries, write_corpus, write_token_sidecar};
use crate::scoring::{LexicalMatch, MaskKind, MaskOptions, ScoreKind, ScoreMode, StmScope};
use crate::search::{
    batch_search_corpus, masked_score_table, read_run_file, with_workers, write_run_file, OcrIndex, Ranking,
    SearchOptions,
};
use crate::synth::{generate, Construction, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "vdr", version, about = "Late-interaction visual document retrieval toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus file and report its shape; optionally write the pooled vectors.
    Index(IndexArgs),
    /// Retrieve top-k documents for every query and write a run file.
    Search(SearchArgs),
    /// Compute nDCG@k and recall against qrels.
    Evaluate(EvaluateArgs),
    /// Measure effectiveness and query latency as the index grows.
    Bench(BenchArgs),
    /// Visual-feature significance and matching ablations.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Export per-token similarity maps for one query/document pair.
    Simmap(SimmapArgs),
    /// Generate a deterministic synthetic fixture.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Coverage features per document and the retrieved-vs-missed significance grid.
    Features(FeaturesArgs),
    /// Special/query-token and lexical/non-lexical masking ablation.
    Matching(MatchingArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Pooled,
    Maxsim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    All,
    Stm,
    Qtm,
    QtmLex,
    QtmNonlex,
}

impl From<MaskArg> for MaskKind {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::All => MaskKind::All,
            MaskArg::Stm => MaskKind::StmOnly,
            MaskArg::Qtm => MaskKind::QtmOnly,
            MaskArg::QtmLex => MaskKind::QtmLexicalOnly,
            MaskArg::QtmNonlex => MaskKind::QtmNonlexicalOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PoolingArg {
    Mean,
    First,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StmArg {
    PadAndPrompt,
    PadOnly,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LexicalArg {
    Exact,
    Near,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlternativeArg {
    AGreater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConstructionArg {
    Random,
    Adversarial,
    Orthogonal,
}

#[derive(Debug, Args)]
struct ScoringArgs {
    #[arg(long, value_enum, default_value = "maxsim")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "all")]
    mask: MaskArg,
    #[arg(long, value_enum, default_value = "mean")]
    pooling: PoolingArg,
    /// Which token kinds the stm mask activates.
    #[arg(long, value_enum, default_value = "pad-and-prompt")]
    stm_scope: StmArg,
    #[arg(long, value_enum, default_value = "exact")]
    lexical: LexicalArg,
    #[arg(long)]
    workers: Option<usize>,
}

impl ScoringArgs {
    fn mode(&self) -> Result<ScoreMode> {
        let kind = match self.mode {
            ModeArg::Pooled => ScoreKind::Pooled,
            ModeArg::Maxsim => ScoreKind::MaxSim,
        };
        ScoreMode::new(kind, self.mask.into())
    }

    fn options(&self) -> SearchOptions {
        SearchOptions {
            mask: mask_options(self.stm_scope, self.lexical),
        }
    }

    fn pooling(&self) -> Pooling {
        match self.pooling {
            PoolingArg::Mean => Pooling::Mean,
            PoolingArg::First => Pooling::First,
        }
    }
}

fn mask_options(stm: StmArg, lexical: LexicalArg) -> MaskOptions {
    MaskOptions {
        stm: match stm {
            StmArg::PadAndPrompt => StmScope::PadAndPrompt,
            StmArg::PadOnly => StmScope::PadOnly,
        },
        lexical: match lexical {
            LexicalArg::Exact => LexicalMatch::Exact,
            LexicalArg::Near => LexicalMatch::Near,
        },
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Token metadata sidecar for the queries (JSON lines).
    #[arg(long)]
    tokens: Option<PathBuf>,
    /// OCR pages (JSON lines); required by the lexical masks.
    #[arg(long)]
    ocr: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    pooling: PoolingArg,
    /// Write the pooled vectors as a single-row-per-record corpus file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "vdr")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    qrels: PathBuf,
    /// Evaluate an existing run file instead of searching.
    #[arg(long, conflicts_with_all = ["corpus", "queries"])]
    run: Option<PathBuf>,
    #[arg(long, required_unless_present = "run")]
    corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "run")]
    queries: Option<PathBuf>,
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    ocr: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Per-query metrics and a summary line, as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    distractors: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Ascending corpus sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    qrels: PathBuf,
    /// Directory of grayscale page images named `<doc_id>.png`.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BG_THRESHOLD)]
    bg_threshold: u8,
    #[arg(long, value_enum, default_value = "a-greater")]
    alternative: AlternativeArg,
    /// Dataset label for the significance grid; defaults to the corpus file stem.
    #[arg(long)]
    dataset: Option<String>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct MatchingArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    ocr: Option<PathBuf>,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all,stm,qtm")]
    modes: Vec<MaskArg>,
    #[arg(long, value_enum, default_value = "pad-and-prompt")]
    stm_scope: StmArg,
    #[arg(long, value_enum, default_value = "exact")]
    lexical: LexicalArg,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimmapArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    query_id: String,
    #[arg(long)]
    doc_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    num_docs: usize,
    #[arg(long, default_value_t = 10)]
    num_queries: usize,
    /// Patches per document: `N` or `MIN-MAX`.
    #[arg(long, default_value = "32")]
    patches: String,
    /// Text tokens per query: `N` or `MIN-MAX`.
    #[arg(long, default_value = "6")]
    tokens_per_query: String,
    #[arg(long, default_value_t = 2)]
    prompt_tokens: usize,
    #[arg(long, default_value_t = 4)]
    pad_tokens: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    planted: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "random")]
    construction: ConstructionArg,
    /// Also write this many distractor documents to `distractors.vdre`.
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    /// Skip OCR pages and page images.
    #[arg(long)]
    no_pages: bool,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Index(a) => cmd_index(a),
        Command::Search(a) => cmd_search(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Analyze(AnalyzeCommand::Features(a)) => cmd_features(a),
        Command::Analyze(AnalyzeCommand::Matching(a)) => cmd_matching(a),
        Command::Simmap(a) => cmd_simmap(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load_ocr(path: Option<&Path>) -> Result<Option<OcrIndex>> {
    path.map(|p| analysis::read_ocr_pages(p).map(|pages| analysis::ocr_index(&pages)))
        .transpose()
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let pooling = match a.pooling {
        PoolingArg::Mean => Pooling::Mean,
        PoolingArg::First => Pooling::First,
    };
    let corpus = load_corpus(&a.corpus)?.with_pooling(pooling);
    let gridded = corpus.iter().filter(|v| v.grid.is_some()).count();
    println!(
        "{}: {} records, dim {}, {} rows, {} with grid, pooling {}",
        a.corpus.display(),
        corpus.len(),
        corpus.dim(),
        corpus.total_rows(),
        gridded,
        pooling
    );
    if let Some(out) = a.out {
        let mut builder = crate::corpus::CorpusBuilder::new(corpus.dim());
        for i in 0..corpus.len() {
            builder.push_raw(&corpus.ids()[i], corpus.pooled(i), None)?;
        }
        write_corpus(&builder.finish(), &out)?;
        println!("pooled vectors written to {}", out.display());
    }
    Ok(())
}

fn load_inputs(input: &InputArgs, pooling: Pooling) -> Result<(Corpus, Corpus, Option<OcrIndex>)> {
    let corpus = load_corpus(&input.corpus)?.with_pooling(pooling);
    let queries = load_queries(&input.queries, input.tokens.as_deref())?;
    let ocr = load_ocr(input.ocr.as_deref())?;
    Ok((corpus, queries, ocr))
}

fn run_search(
    corpus: &Corpus,
    queries: &Corpus,
    scoring: &ScoringArgs,
    k: usize,
    ocr: Option<&OcrIndex>,
) -> Result<Vec<Ranking>> {
    let mode = scoring.mode()?;
    let opts = scoring.options();
    with_workers(scoring.workers, || batch_search_corpus(corpus, queries, mode, k, ocr, &opts))?
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let (corpus, queries, ocr) = load_inputs(&a.input, a.scoring.pooling())?;
    let rankings = run_search(&corpus, &queries, &a.scoring, a.k, ocr.as_ref())?;
    write_run_file(&rankings, &a.tag, &a.out)?;
    println!(
        "{} queries x {} documents ({}), run written to {}",
        queries.len(),
        corpus.len(),
        a.scoring.mode()?,
        a.out.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let qrels = read_qrels(&a.qrels)?;
    let rankings = match (&a.run, &a.corpus, &a.queries) {
        (Some(run), _, _) => read_run_file(run)?,
        (None, Some(corpus), Some(queries)) => {
            let input = InputArgs {
                corpus: corpus.clone(),
                queries: queries.clone(),
                tokens: a.tokens.clone(),
                ocr: a.ocr.clone(),
            };
            let (corpus, queries, ocr) = load_inputs(&input, a.scoring.pooling())?;
            run_search(&corpus, &queries, &a.scoring, a.k.max(1), ocr.as_ref())?
        }
        _ => return Err(Error::invalid("either --run or both --corpus and --queries are required")),
    };
    let summary = evaluate(&rankings, &qrels, a.k)?;
    if let Some(out) = &a.out {
        write_with(out, |w| write_eval_report(&summary, w))?;
    }
    println!(
        "queries={} nDCG@{k}={:.4} recall@1={:.4} recall@{k}={:.4}",
        summary.queries,
        summary.mean_ndcg,
        summary.mean_recall_at_1,
        summary.mean_recall_at_k,
        k = summary.k
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let (base, queries, ocr) = load_inputs(&a.input, a.scoring.pooling())?;
    let distractors = load_corpus(&a.distractors)?;
    let qrels = read_qrels(&a.qrels)?;
    let opts = BenchOptions {
        workers: a.scoring.workers,
        search: a.scoring.options(),
        ..BenchOptions::default()
    };
    let reports = bench_scaling(&a.sizes, &base, &distractors, &queries, &qrels, a.scoring.mode()?, ocr.as_ref(), &opts)?;
    if let Some(out) = &a.out {
        write_with(out, |w| {
            for r in &reports {
                writeln!(w, "{}", serde_json::to_string(r).expect("report serializes"))?;
            }
            Ok(())
        })?;
    }
    println!("size\tmean_ms\tp50_ms\tp95_ms\tndcg@5");
    for r in &reports {
        println!("{}\t{:.3}\t{:.3}\t{:.3}\t{:.4}", r.corpus_size, r.mean_ms, r.p50_ms, r.p95_ms, r.ndcg_at_5);
    }
    Ok(())
}

#[cfg(feature = "cli")]
fn load_raster(path: &Path) -> Result<GrayRaster> {
    let img = image::open(path)
        .map_err(|e| Error::InvalidRecord {
            id: path.display().to_string(),
            message: format!("cannot decode page image: {e}"),
        })?
        .to_luma8();
    let (w, h) = img.dimensions();
    GrayRaster::new(w, h, img.into_raw())
}

fn save_raster(raster: &GrayRaster, path: &Path) -> Result<()> {
    let img = image::GrayImage::from_raw(raster.width, raster.height, raster.pixels.clone())
        .ok_or_else(|| Error::invalid("raster size mismatch"))?;
    img.save(path).map_err(|e| Error::InvalidRecord {
        id: path.display().to_string(),
        message: format!("cannot write page image: {e}"),
    })
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let pages = analysis::read_ocr_pages(a.input.ocr.as_ref().ok_or_else(|| {
        Error::invalid("analyze features requires --ocr")
    })?)?;
    let (corpus, queries, _) = load_inputs(&a.input, a.scoring.pooling())?;
    let qrels = read_qrels(&a.qrels)?;
    let masks: HashMap<String, Bitmap> = pages
        .iter()
        .map(|p| {
            let raster = load_raster(&a.images.join(format!("{}.png", p.doc_id)))?;
            Ok((p.doc_id.clone(), background_mask(&raster, a.bg_threshold)))
        })
        .collect::<Result<_>>()?;
    let features = features_by_doc(&pages, &masks)?;
    let rankings = run_search(&corpus, &queries, &a.scoring, 1, Some(&analysis::ocr_index(&pages)))?;
    let split = split_groups(&rankings, &qrels, &features)?;
    let name = a.dataset.clone().unwrap_or_else(|| {
        a.input
            .corpus
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    });
    let alternative = match a.alternative {
        AlternativeArg::AGreater => Alternative::AGreater,
        AlternativeArg::TwoSided => Alternative::TwoSided,
    };
    let matrix = feature_significance(&[(name, split.clone())], &Feature::ALL, alternative)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    write_with(&a.out_dir.join("features.jsonl"), |w| {
        for p in &pages {
            let f = &features[&p.doc_id];
            let line = serde_json::json!({
                "doc_id": p.doc_id,
                "c_text": f.c_text,
                "c_nontext": f.c_nontext,
                "c_background": f.c_background,
                "token_count": f.token_count,
            });
            writeln!(w, "{line}")?;
        }
        Ok(())
    })?;
    write_with(&a.out_dir.join("significance.jsonl"), |w| matrix.write_jsonl(w))?;
    write_with(&a.out_dir.join("significance.tsv"), |w| matrix.write_tsv(w))?;
    println!(
        "{} pages, group A = {}, group B = {}",
        pages.len(),
        split.group_a.len(),
        split.group_b.len()
    );
    let mut tsv = Vec::new();
    matrix.write_tsv(&mut tsv).map_err(|e| Error::io("<stdout>", e))?;
    print!("{}", String::from_utf8_lossy(&tsv));
    Ok(())
}

fn cmd_matching(a: MatchingArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let queries = load_queries(&a.queries, Some(&a.tokens))?;
    let qrels = read_qrels(&a.qrels)?;
    let ocr = load_ocr(a.ocr.as_deref())?;
    let masks: Vec<MaskKind> = a.modes.iter().map(|&m| m.into()).collect();
    let opts = SearchOptions {
        mask: mask_options(a.stm_scope, a.lexical),
    };
    let (table, check, score_rows) = with_workers(a.workers, || -> Result<_> {
        let table = matching_ablation(&corpus, &queries, &qrels, ocr.as_ref(), &masks, &opts)?;
        let check = partition_check(&corpus, &queries, ocr.as_ref(), &opts)?;
        let mut rows = Vec::with_capacity(queries.len());
        for q in queries.iter() {
            rows.push(masked_score_table(&corpus, q, &masks, ocr.as_ref(), &opts)?);
        }
        Ok((table, check, rows))
    })??;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    write_with(&a.out_dir.join("ablation.jsonl"), |w| table.write_jsonl(w))?;
    write_with(&a.out_dir.join("ablation.tsv"), |w| table.write_tsv(w))?;
    write_with(&a.out_dir.join("scores.tsv"), |w| {
        write!(w, "query_id\tdoc_id")?;
        for m in &masks {
            write!(w, "\t{m}")?;
        }
        writeln!(w)?;
        for (q, table) in queries.iter().zip(&score_rows) {
            for (d, doc_id) in corpus.ids().iter().enumerate() {
                write!(w, "{}\t{doc_id}", q.id)?;
                for col in table {
                    write!(w, "\t{}", crate::search::format_significant(col[d], 9))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    })?;
    write_with(&a.out_dir.join("partition.json"), |w| {
        writeln!(w, "{}", serde_json::to_string(&check).expect("check serializes"))
    })?;

    let mut tsv = Vec::new();
    table.write_tsv(&mut tsv).map_err(|e| Error::io("<stdout>", e))?;
    print!("{}", String::from_utf8_lossy(&tsv));
    println!(
        "partition over {} pairs: max |all - (stm + qtm)| = {:.3e}{}",
        check.pairs,
        check.kind_residual,
        check
            .lexical_residual
            .map(|r| format!(", max |qtm - (lex + nonlex)| = {r:.3e}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_simmap(a: SimmapArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let queries = load_queries(&a.queries, a.tokens.as_deref())?;
    let query = queries
        .by_id(&a.query_id)
        .ok_or_else(|| Error::UnknownId(a.query_id.clone()))?;
    let doc = corpus.by_id(&a.doc_id).ok_or_else(|| Error::UnknownId(a.doc_id.clone()))?;
    let lines = analysis::simmap(query, doc)?;
    write_with(&a.out, |w| analysis::simmap::write_simmap(&lines, w))?;
    let total: f64 = lines.iter().map(|l| f64::from(l.max)).sum();
    println!(
        "{} tokens x {} patches, maxsim {:.6}, written to {}",
        lines.len(),
        doc.len(),
        total,
        a.out.display()
    );
    Ok(())
}

fn parse_range(s: &str, flag: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid(format!("--{flag} expects N or MIN-MAX, got `{s}`"));
    match s.split_once('-') {
        Some((lo, hi)) => Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

/// Seed offset for distractor documents so they never replay base documents.
const DISTRACTOR_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: a.seed,
        num_docs: a.num_docs,
        num_queries: a.num_queries,
        patches_per_doc: parse_range(&a.patches, "patches")?,
        tokens_per_query: parse_range(&a.tokens_per_query, "tokens-per-query")?,
        prompt_tokens: a.prompt_tokens,
        pad_tokens: a.pad_tokens,
        dim: a.dim,
        planted_relevance: a.planted,
        noise: a.noise,
        construction: match a.construction {
            ConstructionArg::Random => Construction::Random,
            ConstructionArg::Adversarial => Construction::PooledAdversarial,
            ConstructionArg::Orthogonal => Construction::OrthogonalSpecial,
        },
        with_pages: !a.no_pages,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;
    let dir = &a.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_corpus(&data.corpus, dir.join("corpus.vdre"))?;
    write_corpus(&data.queries, dir.join("queries.vdre"))?;
    write_token_sidecar(&data.queries, dir.join("queries.tokens.jsonl"))?;
    write_qrels(&data.qrels, dir.join("qrels.tsv"))?;
    if spec.with_pages {
        analysis::write_ocr_pages(&data.pages, dir.join("ocr.jsonl"))?;
        let pages_dir = dir.join("pages");
        fs::create_dir_all(&pages_dir).map_err(|e| Error::io(&pages_dir, e))?;
        for (page, raster) in data.pages.iter().zip(&data.rasters) {
            save_raster(raster, &pages_dir.join(format!("{}.png", page.doc_id)))?;
        }
    }
    if a.distractors > 0 {
        let distractor_spec = SynthSpec {
            seed: a.seed ^ DISTRACTOR_SEED_MIX,
            num_docs: a.distractors,
            num_queries: 0,
            doc_prefix: "x".into(),
            with_pages: false,
            ..spec.clone()
        };
        write_corpus(&generate(&distractor_spec)?.corpus, dir.join("distractors.vdre"))?;
    }
    println!(
        "synthetic fixture: {} docs, {} queries, dim {}, seed {} -> {}",
        data.corpus.len(),
        data.queries.len(),
        spec.dim,
        spec.seed,
        dir.display()
    );
    Ok(())
}
