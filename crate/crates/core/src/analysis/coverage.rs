//! Pixel-area coverage of a page: text, non-text content, and background.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::normalize_token;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayRaster {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(GrayRaster { width, height, pixels })
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = value;
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn fill_rect(&mut self, x: u32, y: u32, w: u32, h: u32, value: u8) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.set(xx, yy, value);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Bitmap {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Bitmap {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn count_and(&self, other: &Bitmap) -> u64 {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count() as u64
    }
}

/// A pixel is background iff its luminance is at least `threshold`.
pub fn background_mask(image: &GrayRaster, threshold: u8) -> Bitmap {
    Bitmap {
        width: image.width,
        height: image.height,
        bits: image.pixels.iter().map(|&p| p >= threshold).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub text: String,
}

/// OCR output for one page image, in pixel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrPage {
    pub doc_id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<OcrBox>,
}

impl OcrPage {
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, why: &str| Error::InvalidRecord {
            id: self.doc_id.clone(),
            message: format!("box {i}: {why}"),
        };
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidRecord {
                id: self.doc_id.clone(),
                message: "page has zero area".into(),
            });
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(b.w > 0.0 && b.h > 0.0) {
                return Err(bad(i, "width and height must be positive"));
            }
            if b.x < 0.0 || b.y < 0.0 || b.x + b.w > f64::from(self.width) || b.y + b.h > f64::from(self.height) {
                return Err(bad(i, "box extends beyond the page"));
            }
        }
        Ok(())
    }

    /// Whitespace-split OCR tokens, in reading order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.boxes.iter().flat_map(|b| b.text.split_whitespace())
    }

    pub fn token_count(&self) -> usize {
        self.words().count()
    }

    /// Normalized token set used for lexical matching.
    pub fn token_set(&self) -> HashSet<String> {
        self.words()
            .map(normalize_token)
            .filter(|t| !t.is_empty())
            .collect()
    }

    /// Union of all boxes, rasterized by pixel centre.
    pub fn text_bitmap(&self) -> Bitmap {
        let mut bm = Bitmap::new(self.width, self.height);
        for b in &self.boxes {
            let x0 = (b.x - 0.5).ceil().max(0.0) as u32;
            let y0 = (b.y - 0.5).ceil().max(0.0) as u32;
            let x1 = ((b.x + b.w - 0.5).ceil().max(0.0) as u32).min(self.width);
            let y1 = ((b.y + b.h - 0.5).ceil().max(0.0) as u32).min(self.height);
            for y in y0..y1 {
                for x in x0..x1 {
                    bm.set(x, y, true);
                }
            }
        }
        bm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualFeatures {
    pub c_text: f64,
    pub c_nontext: f64,
    pub c_background: f64,
    pub token_count: usize,
}

impl VisualFeatures {
    /// `(C_t + C_i) + C_∅`; exactly 1.0 because `C_∅` is the residual.
    pub fn closure_sum(&self) -> f64 {
        (self.c_text + self.c_nontext) + self.c_background
    }
}

/// Raw pixel areas behind [`VisualFeatures`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageAreas {
    pub a_total: u64,
    pub a_t: u64,
    pub a_tbg: u64,
    pub a_bg: u64,
}

pub fn coverage_areas(page: &OcrPage, background: &Bitmap) -> Result<CoverageAreas> {
    page.validate()?;
    if background.width != page.width || background.height != page.height {
        return Err(Error::InvalidRecord {
            id: page.doc_id.clone(),
            message: format!(
                "background mask is {}x{} but page is {}x{}",
                background.width, background.height, page.width, page.height
            ),
        });
    }
    let text = page.text_bitmap();
    Ok(CoverageAreas {
        a_total: u64::from(page.width) * u64::from(page.height),
        a_t: text.count(),
        a_tbg: text.count_and(background),
        a_bg: background.count(),
    })
}

/// Text, non-text and background coverage fractions of a page.
pub fn coverage(page: &OcrPage, background: &Bitmap) -> Result<VisualFeatures> {
    let areas = coverage_areas(page, background)?;
    let total = areas.a_total as f64;
    let c_text = (areas.a_t - areas.a_tbg) as f64 / total;
    let c_nontext = (areas.a_total as f64 - areas.a_t as f64 - areas.a_bg as f64) / total;
    if c_nontext < -1e-9 {
        return Err(Error::Coverage {
            doc_id: page.doc_id.clone(),
            a_total: areas.a_total,
            a_t: areas.a_t,
            a_tbg: areas.a_tbg,
            a_bg: areas.a_bg,
        });
    }
    let c_nontext = c_nontext.max(0.0);
    Ok(VisualFeatures {
        c_text,
        c_nontext,
        c_background: 1.0 - (c_text + c_nontext),
        token_count: page.token_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(w: u32, h: u32, boxes: Vec<OcrBox>) -> OcrPage {
        OcrPage {
            doc_id: "p".into(),
            width: w,
            height: h,
            boxes,
        }
    }

    fn bx(x: f64, y: f64, w: f64, h: f64, text: &str) -> OcrBox {
        OcrBox { x, y, w, h, text: text.into() }
    }

    #[test]
    fn blank_page_is_all_background() {
        let f = coverage(&page(10, 10, vec![]), &Bitmap::filled(10, 10, true)).unwrap();
        assert_eq!((f.c_text, f.c_nontext, f.c_background, f.token_count), (0.0, 0.0, 1.0, 0));
    }

    #[test]
    fn full_page_text_box() {
        let p = page(10, 10, vec![bx(0.0, 0.0, 10.0, 10.0, "all text here")]);
        let f = coverage(&p, &Bitmap::new(10, 10)).unwrap();
        assert_eq!((f.c_text, f.c_nontext, f.c_background, f.token_count), (1.0, 0.0, 0.0, 3));
    }

    #[test]
    fn worked_example() {
        // 20x50 box at the origin; 200 background pixels inside it and
        // 4800 outside for 5000 in total.
        let p = page(100, 100, vec![bx(0.0, 0.0, 20.0, 50.0, "x")]);
        let mut mask = Bitmap::new(100, 100);
        let mut inside = 0;
        let mut outside = 0;
        for y in 0..100 {
            for x in 0..100 {
                let in_box = x < 20 && y < 50;
                if in_box && inside < 200 {
                    mask.set(x, y, true);
                    inside += 1;
                } else if !in_box && outside < 4800 {
                    mask.set(x, y, true);
                    outside += 1;
                }
            }
        }
        let areas = coverage_areas(&p, &mask).unwrap();
        assert_eq!(areas, CoverageAreas { a_total: 10_000, a_t: 1000, a_tbg: 200, a_bg: 5000 });
        let f = coverage(&p, &mask).unwrap();
        assert!((f.c_text - 0.08).abs() < 1e-12);
        assert!((f.c_nontext - 0.40).abs() < 1e-12);
        assert!((f.c_background - 0.52).abs() < 1e-12);
        assert_eq!(f.closure_sum(), 1.0);
    }

    #[test]
    fn overlapping_boxes_counted_once() {
        let p = page(10, 10, vec![bx(0.0, 0.0, 6.0, 10.0, "a"), bx(4.0, 0.0, 6.0, 10.0, "b")]);
        let f = coverage(&p, &Bitmap::new(10, 10)).unwrap();
        assert_eq!(f.c_text, 1.0);
    }

    #[test]
    fn inconsistent_mask_is_data_error() {
        let p = page(10, 10, vec![bx(0.0, 0.0, 10.0, 10.0, "a")]);
        let err = coverage(&p, &Bitmap::filled(10, 10, true)).unwrap_err();
        assert!(matches!(err, Error::Coverage { a_total: 100, a_t: 100, a_tbg: 100, a_bg: 100, .. }));
    }

    #[test]
    fn box_validation() {
        assert!(page(10, 10, vec![bx(5.0, 5.0, 6.0, 1.0, "a")]).validate().is_err());
        assert!(page(10, 10, vec![bx(0.0, 0.0, 0.0, 1.0, "a")]).validate().is_err());
        assert!(coverage(&page(10, 10, vec![]), &Bitmap::new(5, 10)).is_err());
    }

    #[test]
    fn threshold_masks() {
        let white = GrayRaster::filled(4, 4, 255);
        assert_eq!(background_mask(&white, 250).count(), 16);
        let black = GrayRaster::filled(4, 4, 0);
        assert_eq!(background_mask(&black, 250).count(), 0);
        let mut checker = GrayRaster::filled(6, 4, 0);
        for y in 0..4 {
            for x in 0..6 {
                if (x + y) % 2 == 0 {
                    checker.set(x, y, 255);
                }
            }
        }
        assert_eq!(background_mask(&checker, 250).count(), 12);
    }

    #[test]
    fn token_set_is_normalized() {
        let p = page(10, 10, vec![bx(0.0, 0.0, 5.0, 5.0, "Health Team,"), bx(5.0, 5.0, 5.0, 5.0, "works -")]);
        let set = p.token_set();
        assert_eq!(set.len(), 3);
        assert!(set.contains("health") && set.contains("team") && set.contains("works"));
        assert_eq!(p.token_count(), 4);
    }
}
