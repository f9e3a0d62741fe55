//! Pluggable providers standing in for the external perception and
//! captioning models of the full-scale pipelines: box-to-mask conversion,
//! automatic mask proposal, caption generation, and label scoring. Each has
//! a deterministic stub built from the scene geometry or simple pixel
//! statistics.

use ndarray::{Array2, Array3};

use crate::data::tokenizer::{Vocabulary, COLOR_TABLE, SHAPE_NAMES};
use crate::image::RgbaImage;
use crate::{Error, Result};

use super::sample::BoxAnnotation;
use super::scene::Scene;

/// Converts a box annotation into a binary mask over the full image.
pub trait MaskProvider {
    fn mask_for_box(&self, rgb: &Array3<f64>, annotation: &BoxAnnotation) -> Result<Array2<f64>>;

    /// Whether concurrent calls are safe; stubs are pure.
    fn reentrant(&self) -> bool {
        true
    }
}

/// Proposes candidate object masks for an image (automatic segmentation
/// stand-in).
pub trait MaskProposer {
    fn propose(&self, rgb: &Array3<f64>) -> Result<Vec<Array2<f64>>>;
}

/// Produces a caption for a composited image.
pub trait CaptionProvider {
    fn caption(&self, composite: &RgbaImage) -> Result<String>;
}

/// Scores a composited region against a class label.
pub trait RegionScorer {
    fn score(&self, composite: &RgbaImage, label: &str) -> Result<f64>;
}

// ---------------------------------------------------------------------------
// Stubs
// ---------------------------------------------------------------------------

/// Fills the annotated box with ones.
pub struct BoxFillProvider;

impl MaskProvider for BoxFillProvider {
    fn mask_for_box(&self, rgb: &Array3<f64>, annotation: &BoxAnnotation) -> Result<Array2<f64>> {
        let (h, w, _) = rgb.dim();
        annotation.validate(h, w)?;
        let mut mask = Array2::zeros((h, w));
        for y in annotation.y0..annotation.y1 {
            for x in annotation.x0..annotation.x1 {
                mask[[y, x]] = 1.0;
            }
        }
        Ok(mask)
    }
}

/// Oracle provider backed by a generated scene: returns the true shape mask
/// whose tight bounding box matches the annotation.
pub struct SceneOracleProvider<'a> {
    pub scene: &'a Scene,
}

impl MaskProvider for SceneOracleProvider<'_> {
    fn mask_for_box(&self, _rgb: &Array3<f64>, annotation: &BoxAnnotation) -> Result<Array2<f64>> {
        self.scene
            .shapes
            .iter()
            .find(|s| {
                s.bbox.x0 == annotation.x0
                    && s.bbox.y0 == annotation.y0
                    && s.bbox.x1 == annotation.x1
                    && s.bbox.y1 == annotation.y1
            })
            .map(|s| s.mask.clone())
            .ok_or_else(|| Error::Provider("no scene region matches the annotation box".into()))
    }
}

impl MaskProposer for SceneOracleProvider<'_> {
    fn propose(&self, _rgb: &Array3<f64>) -> Result<Vec<Array2<f64>>> {
        Ok(self.scene.shapes.iter().map(|s| s.mask.clone()).collect())
    }
}

/// Pixel-statistics caption stub: dominant foreground color by nearest
/// palette entry, shape kind by the mask's fill ratio within its bounding
/// box (square ~ 1, circle ~ pi/4, triangle ~ 1/2).
pub struct HeuristicCaptionProvider;

pub(crate) fn dominant_color_name(composite: &RgbaImage) -> Result<&'static str> {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for ((y, x), &a) in composite.alpha.indexed_iter() {
        if a == 1.0 {
            for c in 0..3 {
                sum[c] += composite.rgb[[y, x, c]];
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Provider("composite has no foreground".into()));
    }
    let mean = [sum[0] / count as f64, sum[1] / count as f64, sum[2] / count as f64];
    let mut best = None;
    for (name, rgb) in COLOR_TABLE.iter() {
        let d: f64 = (0..3).map(|c| (mean[c] - rgb[c]).powi(2)).sum();
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((*name, d));
        }
    }
    Ok(best.expect("non-empty color table").0)
}

pub(crate) fn shape_name_from_fill(composite: &RgbaImage) -> Result<&'static str> {
    let bbox = BoxAnnotation::of_mask(&composite.alpha, "")
        .ok_or_else(|| Error::Provider("composite has no foreground".into()))?;
    let area: f64 = composite.alpha.iter().filter(|&&v| v == 1.0).count() as f64;
    let fill = area / (bbox.width() * bbox.height()) as f64;
    Ok(if fill >= 0.92 {
        SHAPE_NAMES[1] // square
    } else if fill <= 0.64 {
        SHAPE_NAMES[2] // triangle
    } else {
        SHAPE_NAMES[0] // circle
    })
}

impl CaptionProvider for HeuristicCaptionProvider {
    fn caption(&self, composite: &RgbaImage) -> Result<String> {
        let color = dominant_color_name(composite)?;
        let shape = shape_name_from_fill(composite)?;
        Ok(format!("a {color} {shape} on a white background"))
    }
}

/// Pixel-statistics scorer: +1 when the dominant color matches the label's
/// color word, +1 when the fill-ratio shape matches the label's shape word,
/// minus a small alignment penalty so distinct candidates rarely tie.
pub struct HeuristicScorer;

impl RegionScorer for HeuristicScorer {
    fn score(&self, composite: &RgbaImage, label: &str) -> Result<f64> {
        let mut words = label.split_whitespace();
        let (color_word, shape_word) = (words.next().unwrap_or(""), words.next().unwrap_or(""));
        let color = dominant_color_name(composite)?;
        let shape = shape_name_from_fill(composite)?;
        let mut score = 0.0;
        if color == color_word {
            score += 1.0;
        }
        if shape == shape_word {
            score += 1.0;
        }
        // Mean foreground distance to the label color, as a soft component.
        if let Some(target) = Vocabulary::color_rgb(color_word) {
            let mut sum = [0.0f64; 3];
            let mut count = 0usize;
            for ((y, x), &a) in composite.alpha.indexed_iter() {
                if a == 1.0 {
                    for c in 0..3 {
                        sum[c] += composite.rgb[[y, x, c]];
                    }
                    count += 1;
                }
            }
            if count > 0 {
                let d: f64 = (0..3)
                    .map(|c| (sum[c] / count as f64 - target[c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                score -= 0.1 * d;
            }
        }
        Ok(score)
    }
}

/// Test stub that violates the containment contract on purpose.
pub struct OutOfBoxProvider;

impl MaskProvider for OutOfBoxProvider {
    fn mask_for_box(&self, rgb: &Array3<f64>, _annotation: &BoxAnnotation) -> Result<Array2<f64>> {
        let (h, w, _) = rgb.dim();
        let mut mask = Array2::zeros((h, w));
        mask[[0, 0]] = 1.0;
        mask[[h - 1, w - 1]] = 1.0;
        Ok(mask)
    }
}
