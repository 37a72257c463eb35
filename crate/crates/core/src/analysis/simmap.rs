//! Per-token similarity maps over a document's patch grid.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::corpus::{EmbeddingView, TokenKind};
use crate::error::{Error, Result};
use crate::scoring::dot;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimmapLine {
    pub token_index: usize,
    pub text: Option<String>,
    pub kind: Option<TokenKind>,
    /// Similarity to every patch, row-major over the grid.
    pub similarities: Vec<f32>,
    pub argmax: usize,
    pub row: u32,
    pub col: u32,
    pub max: f32,
}

/// One line per query token. The document must carry a grid.
pub fn simmap(query: EmbeddingView<'_>, doc: EmbeddingView<'_>) -> Result<Vec<SimmapLine>> {
    let grid = doc.grid.ok_or_else(|| Error::MissingGrid(doc.id.to_owned()))?;
    if query.dim != doc.dim {
        return Err(Error::Dimension {
            first_id: query.id.to_owned(),
            second_id: doc.id.to_owned(),
            expected: query.dim,
            found: doc.dim,
        });
    }
    Ok(query
        .rows()
        .enumerate()
        .map(|(i, q)| {
            let similarities: Vec<f32> = doc.rows().map(|d| dot(q, d)).collect();
            let (argmax, max) = similarities
                .iter()
                .copied()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (j, s)| if s > best.1 { (j, s) } else { best });
            let (row, col) = grid.position(argmax);
            let token = query.tokens.map(|t| &t[i]);
            SimmapLine {
                token_index: i,
                text: token.map(|t| t.text.clone()),
                kind: token.map(|t| t.kind),
                similarities,
                argmax,
                row,
                col,
                max,
            }
        })
        .collect())
}

pub fn write_simmap<W: Write>(lines: &[SimmapLine], w: &mut W) -> std::io::Result<()> {
    for line in lines {
        writeln!(w, "{}", serde_json::to_string(line).expect("simmap line serializes"))?;
    }
    Ok(())
}

pub fn export_simmap(query: EmbeddingView<'_>, doc: EmbeddingView<'_>, path: impl AsRef<Path>) -> Result<()> {
    let lines = simmap(query, doc)?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_simmap(&lines, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
