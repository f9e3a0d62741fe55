//! Referring-expression comprehension: rank proposals by similarity between
//! the expression and the alpha-focused encoding of each proposal, averaged
//! over the enabled preprocessing variants.

use ndarray::Array2;

use crate::data::BoxAnnotation;
use crate::image::RgbaImage;
use crate::model::{encode_image, encode_text, Embedding, EncoderParams};
use crate::{Error, Result};

use super::preprocess::{background_blur, box_to_alpha, crop_square_zero_fill, grayscale, PreprocessSpec};

/// A candidate region: a box plus an optional mask. Without a mask the
/// alpha map falls back to the filled box.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub bbox: BoxAnnotation,
    pub mask: Option<Array2<f64>>,
}

impl Proposal {
    fn alpha(&self, h: usize, w: usize) -> Result<Array2<f64>> {
        match &self.mask {
            Some(m) => {
                if m.dim() != (h, w) {
                    return Err(Error::Shape(format!(
                        "proposal mask {:?} does not match image {h}x{w}",
                        m.dim()
                    )));
                }
                Ok(m.clone())
            }
            None => box_to_alpha(&self.bbox, h, w),
        }
    }
}

/// Mean similarity of one proposal across the enabled variants.
fn proposal_score(
    rgb: &ndarray::Array3<f64>,
    proposal: &Proposal,
    expr: &Embedding,
    spec: &PreprocessSpec,
    params: &EncoderParams,
) -> Result<f64> {
    let (h, w, _) = rgb.dim();
    let alpha = proposal.alpha(h, w)?;
    let base = RgbaImage::new(rgb.clone(), alpha)?;
    let mut total = 0.0;
    let mut count = 0usize;
    if spec.original {
        total += encode_image(&base, params)?.dot(expr);
        count += 1;
    }
    if let Some(sigma) = spec.blur_sigma {
        let blurred = background_blur(&base, sigma)?;
        total += encode_image(&blurred, params)?.dot(expr);
        count += 1;
    }
    if spec.crop {
        let cropped = crop_square_zero_fill(&base, &proposal.bbox, params.config.image_size)?;
        total += encode_image(&cropped, params)?.dot(expr);
        count += 1;
    }
    if spec.grayscale {
        let gray = grayscale(&base);
        total += encode_image(&gray, params)?.dot(expr);
        count += 1;
    }
    Ok(total / count as f64)
}

/// Choose the proposal whose ensemble-averaged similarity with the
/// expression is highest; exact ties go to the lowest index.
pub fn rec_select(
    rgb: &ndarray::Array3<f64>,
    proposals: &[Proposal],
    expression_tokens: &[u32],
    spec: &PreprocessSpec,
    params: &EncoderParams,
) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::Input("no proposals".into()));
    }
    spec.validate()?;
    let expr = encode_text(expression_tokens, params)?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, p) in proposals.iter().enumerate() {
        let score = proposal_score(rgb, p, &expr, spec, params)?;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

/// Crop-only comparison path: each proposal's box is cropped to a
/// zero-filled square, rescaled, and encoded with alpha all ones (no region
/// focus); the context outside the box is discarded.
pub fn rec_select_crop_only(
    rgb: &ndarray::Array3<f64>,
    proposals: &[Proposal],
    expression_tokens: &[u32],
    params: &EncoderParams,
) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::Input("no proposals".into()));
    }
    let expr = encode_text(expression_tokens, params)?;
    let (h, w, _) = rgb.dim();
    let full = RgbaImage::new(rgb.clone(), Array2::ones((h, w)))?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, p) in proposals.iter().enumerate() {
        let crop = crop_square_zero_fill(&full, &p.bbox, params.config.image_size)?;
        let crop_full_alpha = RgbaImage::with_full_alpha(crop.rgb)?;
        let score = encode_image(&crop_full_alpha, params)?.dot(&expr);
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SceneSpec, Vocabulary};
    use crate::eval::dataset::build_eval_set;
    use crate::model::ArchConfig;
    use crate::rng::SeedStreams;

    fn tiny_params() -> EncoderParams {
        let mut rng = SeedStreams::new(0).stream("init");
        EncoderParams::init(ArchConfig { image_size: 32, ..ArchConfig::tiny() }, &mut rng)
    }

    fn scene_proposals() -> (ndarray::Array3<f64>, Vec<Proposal>, Vec<u32>) {
        let spec = SceneSpec::default();
        let set = build_eval_set(&spec, 1, 77, &SeedStreams::new(6)).unwrap();
        let scene = &set.scenes[0];
        let proposals: Vec<Proposal> = scene
            .shapes
            .iter()
            .map(|s| Proposal { bbox: s.bbox.clone(), mask: Some(s.mask.clone()) })
            .collect();
        let tokens = Vocabulary::builtin().tokenize(&scene.shapes[0].caption, 8).unwrap();
        (scene.rgb.clone(), proposals, tokens)
    }

    #[test]
    fn single_proposal_is_always_selected() {
        let params = tiny_params();
        let (rgb, proposals, tokens) = scene_proposals();
        let one = vec![proposals[0].clone()];
        let idx = rec_select(&rgb, &one, &tokens, &PreprocessSpec::default(), &params).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn empty_proposals_error() {
        let params = tiny_params();
        let (rgb, _, tokens) = scene_proposals();
        assert!(rec_select(&rgb, &[], &tokens, &PreprocessSpec::default(), &params).is_err());
    }

    /// Permutation invariance up to tie-breaking: permuting proposals moves
    /// the winner's index accordingly.
    #[test]
    fn selection_is_permutation_invariant() {
        let params = tiny_params();
        let (rgb, proposals, tokens) = scene_proposals();
        if proposals.len() < 2 {
            return;
        }
        let spec = PreprocessSpec::default();
        let chosen = rec_select(&rgb, &proposals, &tokens, &spec, &params).unwrap();
        let mut reversed = proposals.clone();
        reversed.reverse();
        let chosen_rev = rec_select(&rgb, &reversed, &tokens, &spec, &params).unwrap();
        assert_eq!(reversed.len() - 1 - chosen_rev, chosen);
    }

    #[test]
    fn box_fallback_is_used_when_mask_missing() {
        let params = tiny_params();
        let (rgb, mut proposals, tokens) = scene_proposals();
        for p in &mut proposals {
            p.mask = None;
        }
        // Must run without error and still return a valid index.
        let idx = rec_select(&rgb, &proposals, &tokens, &PreprocessSpec::default(), &params).unwrap();
        assert!(idx < proposals.len());
    }
}
