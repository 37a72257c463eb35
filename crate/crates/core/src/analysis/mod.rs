//! Matching-attribution and visual-feature analyses.

pub mod ablation;
pub mod coverage;
pub mod significance;
pub mod simmap;
pub mod stats;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::search::OcrIndex;

pub use ablation::{matching_ablation, partition_check, AblationRow, AblationTable, PartitionCheck};
pub use coverage::{background_mask, coverage, Bitmap, GrayRaster, OcrBox, OcrPage, VisualFeatures};
pub use significance::{feature_significance, split_groups, Feature, GroupSplit, SignificanceMatrix};
pub use simmap::{export_simmap, simmap, SimmapLine};
pub use stats::{mann_whitney, Alternative, MannWhitney};

/// Default luminance at or above which a pixel counts as background.
pub const DEFAULT_BG_THRESHOLD: u8 = 250;

pub fn read_ocr_pages(path: impl AsRef<Path>) -> Result<Vec<OcrPage>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pages = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let page: OcrPage = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        page.validate()?;
        pages.push(page);
    }
    Ok(pages)
}

pub fn write_ocr_pages(pages: &[OcrPage], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pages {
        writeln!(w, "{}", serde_json::to_string(p).expect("page serializes")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn ocr_index(pages: &[OcrPage]) -> OcrIndex {
    pages.iter().map(|p| (p.doc_id.clone(), p.token_set())).collect()
}

/// Features per document id.
pub fn features_by_doc(
    pages: &[OcrPage],
    masks: &HashMap<String, Bitmap>,
) -> Result<HashMap<String, VisualFeatures>> {
    pages
        .iter()
        .map(|p| {
            let mask = masks
                .get(&p.doc_id)
                .ok_or_else(|| Error::InvalidRecord {
                    id: p.doc_id.clone(),
                    message: "no page image for background detection".into(),
                })?;
            Ok((p.doc_id.clone(), coverage(p, mask)?))
        })
        .collect()
}
