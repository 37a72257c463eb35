//! Browser demo over `vdr-core`.
//!
//! Every operation builds a small synthetic fixture in memory, runs the
//! engine on it and returns JSON for the page script to draw. The plain
//! functions are usable (and tested) natively; the `#[wasm_bindgen]`
//! wrappers only turn errors into JS exceptions.

use serde::Serialize;
use vdr_core::analysis::simmap;
use vdr_core::evaluation::evaluate;
use vdr_core::search::{batch_search_corpus, SearchOptions};
use vdr_core::synth::{generate, Construction, SynthData, SynthSpec};
use vdr_core::{contrastive_loss, contrastive_loss_grad, ScoreMode};
use wasm_bindgen::prelude::*;

const MAX_DOCS: usize = 2000;

fn construction(name: &str) -> Result<Construction, String> {
    match name {
        "random" => Ok(Construction::Random),
        "adversarial" => Ok(Construction::PooledAdversarial),
        "orthogonal" => Ok(Construction::OrthogonalSpecial),
        other => Err(format!("unknown construction `{other}`")),
    }
}

fn fixture(seed: u64, num_docs: usize, noise: f64, kind: &str) -> Result<SynthData, String> {
    if !(1..=MAX_DOCS).contains(&num_docs) {
        return Err(format!("num_docs must be between 1 and {MAX_DOCS}"));
    }
    let spec = SynthSpec {
        seed,
        num_docs,
        num_queries: num_docs.min(8),
        noise,
        construction: construction(kind)?,
        with_pages: false,
        ..SynthSpec::default()
    };
    generate(&spec).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ModeResult {
    mode: String,
    ndcg_at_5: f64,
    recall_at_1: f64,
    queries: Vec<QueryResult>,
}

#[derive(Serialize)]
struct QueryResult {
    query_id: String,
    relevant: String,
    top: Vec<(String, f64)>,
}

/// Pooled versus late-interaction retrieval on the same fixture.
pub fn rank_json(seed: u64, num_docs: usize, noise: f64, kind: &str) -> Result<String, String> {
    let data = fixture(seed, num_docs, noise, kind)?;
    let mut modes = Vec::new();
    for mode in [ScoreMode::POOLED, ScoreMode::MAXSIM] {
        let runs = batch_search_corpus(&data.corpus, &data.queries, mode, 5, None, &SearchOptions::default())
            .map_err(|e| e.to_string())?;
        let summary = evaluate(&runs, &data.qrels, 5).map_err(|e| e.to_string())?;
        let queries = runs
            .iter()
            .map(|r| QueryResult {
                query_id: r.query_id.clone(),
                relevant: data.qrels.get(&r.query_id).and_then(|g| g.keys().next().cloned()).unwrap_or_default(),
                top: r.hits.iter().map(|h| (h.doc_id.clone(), h.score)).collect(),
            })
            .collect();
        modes.push(ModeResult {
            mode: mode.to_string(),
            ndcg_at_5: summary.mean_ndcg,
            recall_at_1: summary.mean_recall_at_1,
            queries,
        });
    }
    serde_json::to_string(&modes).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Heatmap {
    query_id: String,
    doc_id: String,
    rows: u32,
    cols: u32,
    score: f64,
    tokens: Vec<simmap::SimmapLine>,
}

/// Per-token similarity maps between one query and its relevant document.
pub fn simmap_json(seed: u64, query_index: usize, noise: f64, kind: &str) -> Result<String, String> {
    let data = fixture(seed, 40, noise, kind)?;
    if query_index >= data.queries.len() {
        return Err(format!("query index must be below {}", data.queries.len()));
    }
    let query = data.queries.get(query_index);
    let doc_id = data.qrels.get(query.id).and_then(|g| g.keys().next()).ok_or("query has no relevant document")?;
    let doc = data.corpus.by_id(doc_id).ok_or("relevant document missing")?;
    let lines = simmap::simmap(query, doc).map_err(|e| e.to_string())?;
    let grid = doc.grid.ok_or("document has no grid")?;
    let heatmap = Heatmap {
        query_id: query.id.to_owned(),
        doc_id: doc_id.clone(),
        rows: grid.rows,
        cols: grid.cols,
        score: lines.iter().map(|l| f64::from(l.max)).sum(),
        tokens: lines,
    };
    serde_json::to_string(&heatmap).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct LossPoint {
    s_pos: f64,
    loss: f64,
    d_pos: f64,
}

/// Contrastive loss and its gradient as the positive score sweeps past the
/// hardest negative.
pub fn loss_json(s_neg: f64, tau: f64, points: usize) -> Result<String, String> {
    if !(2..=2000).contains(&points) {
        return Err("points must be between 2 and 2000".into());
    }
    let (lo, hi) = (s_neg - 3.0, s_neg + 3.0);
    let curve: Vec<LossPoint> = (0..points)
        .map(|i| {
            let s_pos = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let loss = contrastive_loss(s_pos, &[s_neg], tau)?;
            let grad = contrastive_loss_grad(s_pos, &[s_neg], tau)?;
            Ok(LossPoint { s_pos, loss, d_pos: grad.d_pos })
        })
        .collect::<vdr_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rank_demo(seed: u32, num_docs: u32, noise: f64, construction: &str) -> Result<String, JsError> {
    js(rank_json(u64::from(seed), num_docs as usize, noise, construction))
}

#[wasm_bindgen]
pub fn simmap_demo(seed: u32, query_index: u32, noise: f64, construction: &str) -> Result<String, JsError> {
    js(simmap_json(u64::from(seed), query_index as usize, noise, construction))
}

#[wasm_bindgen]
pub fn loss_curve(s_neg: f64, tau: f64, points: u32) -> Result<String, JsError> {
    js(loss_json(s_neg, tau, points as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn adversarial_fixture_separates_modes() {
        let v: Value = serde_json::from_str(&rank_json(7, 50, 0.0, "adversarial").unwrap()).unwrap();
        assert_eq!(v[0]["mode"], "pooled/all");
        assert_eq!(v[1]["recall_at_1"], 1.0);
        assert!(v[0]["recall_at_1"].as_f64().unwrap() < 1.0);
        assert_eq!(v[1]["queries"][0]["top"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn heatmap_covers_grid() {
        let v: Value = serde_json::from_str(&simmap_json(7, 2, 0.0, "random").unwrap()).unwrap();
        let cells = v["rows"].as_u64().unwrap() * v["cols"].as_u64().unwrap();
        for t in v["tokens"].as_array().unwrap() {
            assert_eq!(t["similarities"].as_array().unwrap().len() as u64, cells);
        }
        assert!(simmap_json(7, 99, 0.0, "random").is_err());
    }

    #[test]
    fn loss_curve_is_decreasing() {
        let v: Value = serde_json::from_str(&loss_json(0.5, 1.0, 50).unwrap()).unwrap();
        let losses: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["loss"].as_f64().unwrap()).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
        assert!(loss_json(0.5, 0.0, 50).is_err());
        assert!(rank_json(1, 10, 0.0, "nope").is_err());
    }
}
