//! Retrieved-vs-missed split of relevant documents and the per-feature
//! significance grid.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::coverage::VisualFeatures;
use crate::analysis::stats::{mann_whitney, Alternative};
use crate::error::{Error, Result};
use crate::evaluation::Qrels;
use crate::search::Ranking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Feature {
    #[serde(rename = "c_text")]
    TextCoverage,
    #[serde(rename = "c_nontext")]
    NonTextCoverage,
    #[serde(rename = "c_background")]
    BackgroundCoverage,
    #[serde(rename = "token_count")]
    TokenCount,
}

impl Feature {
    pub const ALL: [Feature; 4] = [
        Feature::TextCoverage,
        Feature::NonTextCoverage,
        Feature::BackgroundCoverage,
        Feature::TokenCount,
    ];

    pub fn value(self, f: &VisualFeatures) -> f64 {
        match self {
            Feature::TextCoverage => f.c_text,
            Feature::NonTextCoverage => f.c_nontext,
            Feature::BackgroundCoverage => f.c_background,
            Feature::TokenCount => f.token_count as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::TextCoverage => "c_text",
            Feature::NonTextCoverage => "c_nontext",
            Feature::BackgroundCoverage => "c_background",
            Feature::TokenCount => "token_count",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{s}`")))
    }
}

/// Features of relevant documents ranked first (A) versus those that were
/// not (B).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupSplit {
    pub group_a: Vec<VisualFeatures>,
    pub group_b: Vec<VisualFeatures>,
}

/// Splits every relevant document of every ranked query: rank 1 goes to
/// group A, anything else (including not retrieved) to group B.
pub fn split_groups(
    rankings: &[Ranking],
    qrels: &Qrels,
    features: &HashMap<String, VisualFeatures>,
) -> Result<GroupSplit> {
    let mut split = GroupSplit::default();
    for ranking in rankings {
        let judged = qrels
            .get(&ranking.query_id)
            .ok_or_else(|| Error::MissingQrels(ranking.query_id.clone()))?;
        let top = ranking.hits.iter().find(|h| h.rank == 1).map(|h| h.doc_id.as_str());
        for (doc, _) in judged.iter().filter(|(_, &g)| g > 0) {
            let f = *features
                .get(doc)
                .ok_or_else(|| Error::MissingOcr(doc.clone()))?;
            if top == Some(doc.as_str()) {
                split.group_a.push(f);
            } else {
                split.group_b.push(f);
            }
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceCell {
    pub dataset: String,
    pub feature: Feature,
    pub alternative: Alternative,
    pub n_a: usize,
    pub n_b: usize,
    pub computable: bool,
    pub u: Option<f64>,
    pub p: Option<f64>,
}

/// Feature × dataset grid of Mann-Whitney p-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceMatrix {
    pub features: Vec<Feature>,
    pub datasets: Vec<String>,
    /// Row-major: `cells[f * datasets.len() + d]`.
    pub cells: Vec<SignificanceCell>,
}

impl SignificanceMatrix {
    pub fn cell(&self, feature: usize, dataset: usize) -> &SignificanceCell {
        &self.cells[feature * self.datasets.len() + dataset]
    }

    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for c in &self.cells {
            writeln!(w, "{}", serde_json::to_string(c).expect("cell serializes"))?;
        }
        Ok(())
    }

    /// Tab-separated grid; non-computable cells print as `NA`.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "feature")?;
        for d in &self.datasets {
            write!(w, "\t{d}")?;
        }
        writeln!(w)?;
        for (fi, f) in self.features.iter().enumerate() {
            write!(w, "{f}")?;
            for di in 0..self.datasets.len() {
                match self.cell(fi, di).p {
                    Some(p) => write!(w, "\t{p:.6e}")?,
                    None => write!(w, "\tNA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn feature_significance(
    datasets: &[(String, GroupSplit)],
    features: &[Feature],
    alternative: Alternative,
) -> Result<SignificanceMatrix> {
    let mut cells = Vec::with_capacity(datasets.len() * features.len());
    for &feature in features {
        for (name, split) in datasets {
            let a: Vec<f64> = split.group_a.iter().map(|f| feature.value(f)).collect();
            let b: Vec<f64> = split.group_b.iter().map(|f| feature.value(f)).collect();
            let (computable, u, p) = if a.is_empty() || b.is_empty() {
                (false, None, None)
            } else {
                let r = mann_whitney(&a, &b, alternative)?;
                (true, Some(r.u_a), Some(r.p))
            };
            cells.push(SignificanceCell {
                dataset: name.clone(),
                feature,
                alternative,
                n_a: a.len(),
                n_b: b.len(),
                computable,
                u,
                p,
            });
        }
    }
    Ok(SignificanceMatrix {
        features: features.to_vec(),
        datasets: datasets.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::Hit;

    fn vf(c: f64) -> VisualFeatures {
        VisualFeatures {
            c_text: c,
            c_nontext: 0.0,
            c_background: 1.0 - c,
            token_count: (c * 100.0) as usize,
        }
    }

    #[test]
    fn separated_groups_are_significant() {
        let split = GroupSplit {
            group_a: (0..20).map(|i| vf(0.5 + f64::from(i) * 0.01)).collect(),
            group_b: (0..20).map(|i| vf(0.1 + f64::from(i) * 0.01)).collect(),
        };
        let m = feature_significance(&[("d".into(), split)], &[Feature::TextCoverage], Alternative::AGreater).unwrap();
        let p = m.cell(0, 0).p.unwrap();
        assert!(p < 1e-6, "{p}");
    }

    #[test]
    fn identical_groups_not_significant() {
        let g: Vec<_> = (0..15).map(|i| vf(f64::from(i) / 20.0)).collect();
        let data = [("d".to_string(), GroupSplit { group_a: g.clone(), group_b: g })];
        let m = feature_significance(&data, &Feature::ALL, Alternative::AGreater).unwrap();
        assert_eq!((m.features.len(), m.datasets.len()), (4, 1));
        // one-sided p sits just above one half when U equals its mean
        assert!(m.cell(0, 0).p.unwrap() >= 0.5);
        // c_nontext is constant: all ties
        assert_eq!(m.cell(1, 0).p.unwrap(), 1.0);
        let m = feature_significance(&data, &Feature::ALL, Alternative::TwoSided).unwrap();
        assert!(m.cell(0, 0).p.unwrap() >= 0.99);
    }

    #[test]
    fn empty_group_marks_cell_not_computable() {
        let split = GroupSplit { group_a: vec![vf(0.2)], group_b: vec![] };
        let m = feature_significance(&[("x".into(), split)], &[Feature::TokenCount], Alternative::TwoSided).unwrap();
        let cell = m.cell(0, 0);
        assert!(!cell.computable && cell.p.is_none());
        let mut tsv = Vec::new();
        m.write_tsv(&mut tsv).unwrap();
        assert_eq!(String::from_utf8(tsv).unwrap(), "feature\tx\ntoken_count\tNA\n");
    }

    #[test]
    fn split_by_first_rank() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        qrels.insert("q2", "d2", 1);
        qrels.insert("q2", "d3", 0);
        let hit = |d: &str, rank| Hit { doc_id: d.into(), score: 0.0, rank };
        let rankings = vec![
            Ranking { query_id: "q1".into(), hits: vec![hit("d1", 1), hit("d2", 2)] },
            Ranking { query_id: "q2".into(), hits: vec![hit("d3", 1), hit("d2", 2)] },
        ];
        let features: HashMap<_, _> = [("d1", 0.9), ("d2", 0.1), ("d3", 0.5)]
            .into_iter()
            .map(|(d, c)| (d.to_string(), vf(c)))
            .collect();
        let split = split_groups(&rankings, &qrels, &features).unwrap();
        assert_eq!(split.group_a, vec![vf(0.9)]);
        assert_eq!(split.group_b, vec![vf(0.1)]);
    }
}
