//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use vdr_core::analysis::{background_mask, coverage, mann_whitney, Alternative, GrayRaster, OcrBox, OcrPage};
use vdr_core::evaluation::{bench_scaling, BenchOptions};
use vdr_core::scoring::MaskOptions;
use vdr_core::search::{batch_search_corpus, Hit, SearchOptions};
use vdr_core::synth::{generate, Construction, SynthSpec};
use vdr_core::*;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "{} {name}: {} [{:.1}s, budget {}s{}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    pass
}

fn maxsim_oracle() -> Outcome {
    let mut rng = rng(1);
    let mut worst = 0f64;
    for _ in 0..1000 {
        let h = rng.random_range(1..=128);
        let (nq, nd) = (rng.random_range(1..=32), rng.random_range(1..=1024));
        let q = raw_rows(&mut rng, nq, h);
        let d = raw_rows(&mut rng, nd, h);
        let got = maxsim(embedding("q", &q, None).view(), embedding("d", &d, None).view()).unwrap();
        worst = worst.max((got - naive_maxsim(&q, &d, &vec![true; q.len()])).abs());
    }
    Outcome { pass: worst <= 1e-5, detail: format!("1000 instances, max |engine - naive| = {worst:.2e} (tol 1e-5)") }
}

fn attribution_partition() -> Outcome {
    let mut rng = rng(2);
    let (mut kind_res, mut lex_res) = (0f64, 0f64);
    for _ in 0..500 {
        let h = rng.random_range(2..=64);
        let nq = rng.random_range(1..=32);
        let nd = rng.random_range(1..=256);
        let q = raw_rows(&mut rng, nq, h);
        let d = raw_rows(&mut rng, nd, h);
        let qe = embedding("q", &q, Some(random_kinds(&mut rng, nq)));
        let de = embedding("d", &d, None);
        let ocr: HashSet<String> = (0..12).filter(|_| rng.random_bool(0.5)).map(|i| format!("w{i}")).collect();
        let score = |m| {
            let mask = masks_for(qe.view(), m, Some(&ocr), MaskOptions::default()).unwrap();
            score_maxsim(qe.view(), de.view(), &mask).unwrap().value
        };
        let [all, stm, qtm, lex, nonlex] = MaskKind::ALL.map(score);
        kind_res = kind_res.max((all - (stm + qtm)).abs());
        lex_res = lex_res.max((qtm - (lex + nonlex)).abs());
    }
    Outcome {
        pass: kind_res <= 1e-5 && lex_res <= 1e-5,
        detail: format!("500 pairs, max |all-(stm+qtm)| = {kind_res:.2e}, max |qtm-(lex+nonlex)| = {lex_res:.2e} (tol 1e-5)"),
    }
}

fn late_interaction_superiority() -> Outcome {
    let spec = SynthSpec { construction: Construction::PooledAdversarial, with_pages: false, ..SynthSpec::default() };
    let data = generate(&spec).unwrap();
    let opts = SearchOptions::default();
    let r1 = |mode| {
        let runs = batch_search_corpus(&data.corpus, &data.queries, mode, 5, None, &opts).unwrap();
        evaluation::evaluate(&runs, &data.qrels, 5).unwrap().mean_recall_at_1
    };
    let (m, p) = (r1(ScoreMode::MAXSIM), r1(ScoreMode::POOLED));
    let again = generate(&spec).unwrap();
    let deterministic = again.corpus == data.corpus && again.queries == data.queries;
    Outcome {
        pass: m == 1.0 && p <= 0.8 && deterministic,
        detail: format!("seed {}: maxsim recall@1 = {m:.3} (want 1.0), pooled recall@1 = {p:.3} (want <= 0.8), regenerated identically: {deterministic}", spec.seed),
    }
}

fn loss_gradient() -> Outcome {
    let mut rng = rng(4);
    let step = 1e-4;
    let mut worst = 0f64;
    for _ in 0..1000 {
        let tau = rng.random_range(0.05..2.0);
        let s_pos: f64 = rng.random_range(-4.0..4.0);
        let mut negs: Vec<f64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(-4.0..4.0)).collect();
        // keep the hardest negative unique so the loss is differentiable
        let mut sorted = negs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted.len() > 1 && sorted[0] - sorted[1] < 10.0 * step {
            negs.retain(|&v| v != sorted[1]);
        }
        let g = contrastive_loss_grad(s_pos, &negs, tau).unwrap();
        let loss = |p: f64, n: &[f64]| contrastive_loss(p, n, tau).unwrap();
        let fd_pos = (loss(s_pos + step, &negs) - loss(s_pos - step, &negs)) / (2.0 * step);
        let (mut up, mut down) = (negs.clone(), negs.clone());
        up[g.hardest_index] += step;
        down[g.hardest_index] -= step;
        let fd_neg = (loss(s_pos, &up) - loss(s_pos, &down)) / (2.0 * step);
        for (a, n) in [(g.d_pos, fd_pos), (g.d_hardest_neg, fd_neg)] {
            let scale = a.abs().max(n.abs());
            if scale > 0.0 {
                worst = worst.max((a - n).abs() / scale);
            }
        }
    }
    Outcome { pass: worst < 1e-4, detail: format!("1000 draws, max relative error = {worst:.2e} (tol 1e-4)") }
}

fn metric_oracle() -> Outcome {
    let mut rng = rng(5);
    let mut worst = 0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        let docs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let mut grades = BTreeMap::new();
        for d in &docs {
            if rng.random_bool(0.3) {
                grades.insert(d.clone(), rng.random_range(1..=3u32));
            }
        }
        if grades.is_empty() {
            grades.insert(docs[rng.random_range(0..n)].clone(), 1);
        }
        let mut order = docs.clone();
        order.shuffle(&mut rng);
        order.truncate(rng.random_range(1..=n));
        let ranking = ranking_of(&order);
        let mut qrels = Qrels::new();
        for (d, g) in &grades {
            qrels.insert("q", d.clone(), *g);
        }
        let ranked: Vec<&str> = order.iter().map(String::as_str).collect();
        worst = worst.max((ndcg_at_k(&ranking, &qrels, 5).unwrap() - oracle_ndcg(&ranked, &grades, 5)).abs());
        worst = worst.max((recall_at_k(&ranking, &qrels, 1).unwrap() - oracle_recall(&ranked, &grades, 1)).abs());
    }
    let mut qrels = Qrels::new();
    qrels.insert("q", "b", 1);
    let hand = ndcg_at_k(&ranking_of(&["a".into(), "b".into(), "c".into()]), &qrels, 5).unwrap();
    Outcome {
        pass: worst <= 1e-9 && (hand - 0.6309).abs() < 5e-5,
        detail: format!("200 cases, max |engine - oracle| = {worst:.2e} (tol 1e-9); relevant at rank 2 -> {hand:.4} (want 0.6309)"),
    }
}

fn ranking_of(order: &[String]) -> Ranking {
    Ranking {
        query_id: "q".into(),
        hits: order.iter().enumerate().map(|(i, d)| Hit { doc_id: d.clone(), score: -(i as f64), rank: i + 1 }).collect(),
    }
}

fn coverage_closure() -> Outcome {
    let data = generate(&SynthSpec { num_docs: 500, num_queries: 50, ..SynthSpec::default() }).unwrap();
    let mut bad = 0;
    for (page, raster) in data.pages.iter().zip(&data.rasters) {
        let f = coverage(page, &background_mask(raster, 250)).unwrap();
        if f.c_text + f.c_nontext + f.c_background != 1.0 {
            bad += 1;
        }
    }
    // 100x100 page, one 20x50 box with 200 background pixels inside it and
    // 5000 background pixels overall
    let mut raster = GrayRaster::filled(100, 100, 0);
    raster.fill_rect(0, 0, 20, 10, 255);
    raster.fill_rect(20, 0, 80, 60, 255);
    let page = OcrPage {
        doc_id: "worked".into(),
        width: 100,
        height: 100,
        boxes: vec![OcrBox { x: 0.0, y: 0.0, w: 20.0, h: 50.0, text: "x".into() }],
    };
    let mask = background_mask(&raster, 250);
    let f = coverage(&page, &mask).unwrap();
    let worked = mask.count() == 5000
        && (f.c_text - 0.08).abs() < 1e-12
        && (f.c_nontext - 0.40).abs() < 1e-12
        && (f.c_background - 0.52).abs() < 1e-12;
    Outcome {
        pass: bad == 0 && worked,
        detail: format!(
            "{} synthetic pages, {bad} with C_t + C_i + C_bg != 1; worked example -> ({:.2}, {:.2}, {:.2}) (want 0.08, 0.40, 0.52)",
            data.pages.len(),
            f.c_text,
            f.c_nontext,
            f.c_background
        ),
    }
}

fn mann_whitney_correctness() -> Outcome {
    let exact = mann_whitney(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Alternative::AGreater).unwrap();
    let mut rng = rng(7);
    let trials = 1000;
    let mut rejections = 0;
    for _ in 0..trials {
        let a: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        if mann_whitney(&a, &b, Alternative::AGreater).unwrap().p < 0.05 {
            rejections += 1;
        }
    }
    let fpr = f64::from(rejections) / f64::from(trials);
    Outcome {
        pass: exact.exact && (exact.p - 0.05).abs() < 1e-12 && exact.u_a == 9.0 && (0.03..=0.07).contains(&fpr),
        detail: format!("exact p = {:.4} (want 0.05), U_A = {}; null FPR at alpha 0.05 = {fpr:.3} over {trials} trials (want [0.03, 0.07])", exact.p, exact.u_a),
    }
}

fn scaling_trend() -> Outcome {
    let sizes = [500, 10_000, 100_000];
    let common = SynthSpec {
        patches_per_doc: (8, 12),
        tokens_per_query: (3, 6),
        dim: 32,
        with_pages: false,
        ..SynthSpec::default()
    };
    let base = generate(&SynthSpec { seed: 3, num_docs: 500, num_queries: 50, planted_relevance: 0.5, noise: 0.8, ..common.clone() }).unwrap();
    let distractors = generate(&SynthSpec {
        seed: 3 ^ 0x9E37_79B9_7F4A_7C15,
        num_docs: sizes[2] - 500,
        num_queries: 0,
        doc_prefix: "x".into(),
        ..common
    })
    .unwrap();
    let reports = bench_scaling(
        &sizes,
        &base.corpus,
        &distractors.corpus,
        &base.queries,
        &base.qrels,
        ScoreMode::MAXSIM,
        None,
        &BenchOptions::default(),
    )
    .unwrap();
    let ndcg: Vec<f64> = reports.iter().map(|r| r.ndcg_at_5).collect();
    let lat: Vec<f64> = reports.iter().map(|r| r.mean_ms).collect();
    let non_increasing = ndcg.windows(2).all(|w| w[1] <= w[0]);
    let ratios: Vec<f64> = (1..sizes.len())
        .map(|i| (lat[i] / lat[0]) / (sizes[i] as f64 / sizes[0] as f64))
        .collect();
    let linear = ratios.iter().all(|&r| r <= 1.5);
    Outcome {
        pass: non_increasing && linear,
        detail: format!(
            "sizes {sizes:?}: nDCG@5 {} (non-increasing: {non_increasing}); mean latency ms {}; growth relative to linear {} (want <= 1.5)",
            fmt_list(&ndcg, 4),
            fmt_list(&lat, 3),
            fmt_list(&ratios, 3)
        ),
    }
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(feature = "cli")]
fn cli_determinism() -> Outcome {
    use common::pipeline::{run_pipeline, OUTPUTS};
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    let differing: Vec<&str> = OUTPUTS
        .iter()
        .copied()
        .filter(|name| std::fs::read(a.path().join(name)).unwrap() != std::fs::read(b.path().join(name)).unwrap())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: format!("{} output files compared across two runs, differing: {differing:?}", OUTPUTS.len()),
    }
}

#[cfg(not(feature = "cli"))]
fn cli_determinism() -> Outcome {
    Outcome { pass: false, detail: "built without the `cli` feature; the vdr binary is unavailable".into() }
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        check("maxsim-oracle", min(1), maxsim_oracle),
        check("attribution-partition", min(1), attribution_partition),
        check("late-interaction-superiority", min(1), late_interaction_superiority),
        check("loss-gradient", min(1), loss_gradient),
        check("metric-oracle", min(1), metric_oracle),
        check("coverage-closure", min(1), coverage_closure),
        check("mann-whitney", min(2), mann_whitney_correctness),
        check("scaling-trend", min(10), scaling_trend),
        check("cli-determinism", min(5), cli_determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
