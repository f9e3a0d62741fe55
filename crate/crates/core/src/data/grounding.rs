//! Grounding pipeline: box annotations plus a mask provider become RGBA
//! region-text samples.

use ndarray::Array3;

use crate::data::tokenizer::Vocabulary;
use crate::image::RgbaImage;
use crate::Result;

use super::providers::MaskProvider;
use super::sample::{BoxAnnotation, RgbaSample, SampleSource};

#[derive(Debug, Clone)]
pub struct GroundingOutput {
    pub samples: Vec<RgbaSample>,
    /// Annotations dropped because the provider violated its contract.
    pub skipped: usize,
}

/// One sample per annotation: alpha from the provider, caption from the
/// annotation text. A provider mask that escapes the box (dilated by
/// `margin`) or is non-binary skips that annotation and logs it; the output
/// count plus the skip count always equals the annotation count.
pub fn grounding_pipeline(
    rgb: &Array3<f64>,
    annotations: &[BoxAnnotation],
    provider: &dyn MaskProvider,
    margin: usize,
    vocab: &Vocabulary,
    context: usize,
) -> Result<GroundingOutput> {
    let (h, w, _) = rgb.dim();
    let mut samples = Vec::with_capacity(annotations.len());
    let mut skipped = 0usize;

    for (idx, ann) in annotations.iter().enumerate() {
        ann.validate(h, w)?;
        let mask = match provider.mask_for_box(rgb, ann) {
            Ok(m) => m,
            Err(err) => {
                log::warn!("annotation {idx}: provider failed: {err}");
                skipped += 1;
                continue;
            }
        };
        if let Err(err) = validate_mask(&mask, ann, h, w, margin) {
            log::warn!("annotation {idx}: {err}");
            skipped += 1;
            continue;
        }
        let image = RgbaImage::new(rgb.clone(), mask)?;
        let tokens = vocab.tokenize(&ann.text, context)?;
        match RgbaSample::new(image, ann.text.clone(), tokens, SampleSource::Grounding, Some(idx as u32)) {
            Ok(s) => samples.push(s),
            Err(err) => {
                log::warn!("annotation {idx}: degenerate sample: {err}");
                skipped += 1;
            }
        }
    }
    Ok(GroundingOutput { samples, skipped })
}

fn validate_mask(
    mask: &ndarray::Array2<f64>,
    ann: &BoxAnnotation,
    h: usize,
    w: usize,
    margin: usize,
) -> Result<()> {
    if mask.dim() != (h, w) {
        return Err(crate::Error::Provider(format!(
            "mask dims {:?} do not match image {h}x{w}",
            mask.dim()
        )));
    }
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(crate::Error::Provider("mask is not binary".into()));
    }
    let x0 = ann.x0.saturating_sub(margin);
    let y0 = ann.y0.saturating_sub(margin);
    let x1 = (ann.x1 + margin).min(w);
    let y1 = (ann.y1 + margin).min(h);
    for ((y, x), &v) in mask.indexed_iter() {
        if v == 1.0 && (x < x0 || x >= x1 || y < y0 || y >= y1) {
            return Err(crate::Error::Provider(format!(
                "mask pixel ({x}, {y}) escapes the dilated box"
            )));
        }
    }
    if mask.iter().all(|&v| v == 0.0) {
        return Err(crate::Error::Provider("mask is empty".into()));
    }
    Ok(())
}
