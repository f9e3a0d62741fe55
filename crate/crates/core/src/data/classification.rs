//! Classification pipeline: propose masks on labeled images, crop and
//! center each candidate, rank per class by scorer, keep the top k, and
//! caption the white-background composites.

use ndarray::{Array2, Array3};

use crate::data::tokenizer::Vocabulary;
use crate::image::{resize_bilinear2, resize_bilinear3, RgbaImage};
use crate::{Error, Result};

use super::providers::{CaptionProvider, MaskProposer, RegionScorer};
use super::sample::{BoxAnnotation, RgbaSample, SampleSource};

/// An image carrying a class label.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub rgb: Array3<f64>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct ClassificationOutput {
    pub samples: Vec<RgbaSample>,
    /// Candidates dropped (empty masks, degenerate crops).
    pub skipped: usize,
}

/// A candidate after geometry normalization, before ranking.
struct Candidate {
    /// Item index within the label group (for deterministic tie-breaks).
    order: usize,
    score: f64,
    /// Natural-background crop centered on a white square canvas.
    scoring: RgbaImage,
    /// Foreground on pure white, same geometry.
    white: RgbaImage,
}

/// Crop the mask's tight box enlarged by `enlarge` about its center
/// (clamped to the image), center it on a white square canvas, and resize
/// to `out_size`. Returns (scoring composite, white composite).
fn normalize_candidate(
    rgb: &Array3<f64>,
    mask: &Array2<f64>,
    enlarge: f64,
    out_size: usize,
) -> Result<Option<(RgbaImage, RgbaImage)>> {
    let (h, w, _) = rgb.dim();
    let Some(bbox) = BoxAnnotation::of_mask(mask, "") else {
        return Ok(None); // empty foreground: candidate skipped
    };

    // Enlarge about the box center, clamp to the image bounds.
    let cx = (bbox.x0 + bbox.x1) as f64 / 2.0;
    let cy = (bbox.y0 + bbox.y1) as f64 / 2.0;
    let half_w = bbox.width() as f64 * enlarge / 2.0;
    let half_h = bbox.height() as f64 * enlarge / 2.0;
    let x0 = (cx - half_w).floor().max(0.0) as usize;
    let y0 = (cy - half_h).floor().max(0.0) as usize;
    let x1 = (cx + half_w).ceil().min(w as f64) as usize;
    let y1 = (cy + half_h).ceil().min(h as f64) as usize;
    if x0 >= x1 || y0 >= y1 {
        return Ok(None);
    }
    let (cw, ch) = (x1 - x0, y1 - y0);

    // Center the crop on a white square canvas.
    let side = cw.max(ch);
    let ox = (side - cw) / 2;
    let oy = (side - ch) / 2;
    let mut canvas_rgb = Array3::from_elem((side, side, 3), 1.0);
    let mut canvas_white = Array3::from_elem((side, side, 3), 1.0);
    let mut canvas_alpha = Array2::zeros((side, side));
    for y in 0..ch {
        for x in 0..cw {
            let m = mask[[y0 + y, x0 + x]];
            for c in 0..3 {
                let v = rgb[[y0 + y, x0 + x, c]];
                canvas_rgb[[oy + y, ox + x, c]] = v;
                if m == 1.0 {
                    canvas_white[[oy + y, ox + x, c]] = v;
                }
            }
            canvas_alpha[[oy + y, ox + x]] = m;
        }
    }

    let rs_rgb = resize_bilinear3(&canvas_rgb, out_size, out_size);
    let rs_white = resize_bilinear3(&canvas_white, out_size, out_size);
    let rs_alpha = resize_bilinear2(&canvas_alpha, out_size, out_size)
        .mapv(|v| f64::from(u8::from(v > 0.5)));

    let scoring = RgbaImage::new(rs_rgb, rs_alpha.clone())?;
    let white = RgbaImage::new(rs_white, rs_alpha)?;
    Ok(Some((scoring, white)))
}

/// Run the pipeline over labeled images. `k` is the per-class keep count,
/// `enlarge` the crop enlargement factor (the published convention is 1.5).
/// Candidates are ranked per class by score; exact ties keep the lowest
/// candidate index. Final captions are "label, generated caption".
#[allow(clippy::too_many_arguments)]
pub fn classification_pipeline(
    items: &[LabeledImage],
    proposer: &dyn MaskProposer,
    scorer: &dyn RegionScorer,
    captioner: &dyn CaptionProvider,
    k: usize,
    enlarge: f64,
    out_size: usize,
    vocab: &Vocabulary,
    context: usize,
) -> Result<ClassificationOutput> {
    if k == 0 {
        return Err(Error::Input("k must be >= 1".into()));
    }
    if enlarge < 1.0 {
        return Err(Error::Input(format!("enlarge factor {enlarge} must be >= 1")));
    }

    // Group candidates per class label, preserving encounter order.
    let mut labels: Vec<String> = Vec::new();
    let mut per_class: Vec<Vec<Candidate>> = Vec::new();
    let mut skipped = 0usize;

    for item in items {
        let class_idx = match labels.iter().position(|l| *l == item.label) {
            Some(i) => i,
            None => {
                labels.push(item.label.clone());
                per_class.push(Vec::new());
                labels.len() - 1
            }
        };
        for mask in proposer.propose(&item.rgb)? {
            let Some((scoring, white)) = normalize_candidate(&item.rgb, &mask, enlarge, out_size)?
            else {
                skipped += 1;
                continue;
            };
            let score = scorer.score(&scoring, &item.label)?;
            let order = per_class[class_idx].len();
            per_class[class_idx].push(Candidate { order, score, scoring, white });
        }
    }

    let mut samples = Vec::new();
    for (label, mut candidates) in labels.into_iter().zip(per_class.into_iter()) {
        // Descending score, ties by lowest candidate index.
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.order.cmp(&b.order))
        });
        for cand in candidates.into_iter().take(k) {
            let generated = captioner.caption(&cand.white)?;
            let text = format!("{label}, {generated}");
            let tokens = vocab.tokenize(&text, context)?;
            match RgbaSample::new(
                cand.white.clone(),
                text,
                tokens,
                SampleSource::Classification,
                Some(cand.order as u32),
            ) {
                Ok(s) => samples.push(s),
                Err(err) => {
                    log::warn!("classification candidate degenerate: {err}");
                    skipped += 1;
                }
            }
        }
    }
    Ok(ClassificationOutput { samples, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::providers::{HeuristicCaptionProvider, HeuristicScorer, SceneOracleProvider};
    use crate::data::scene::{generate_scene, SceneSpec, ShapeKind};
    use crate::rng::SeedStreams;

    #[test]
    fn single_candidate_is_selected() {
        let spec = SceneSpec { shapes_min: 1, shapes_max: 1, ..SceneSpec::default() };
        let streams = SeedStreams::new(31);
        let scene = generate_scene(&streams, 0, &spec).unwrap();
        let shape = &scene.shapes[0];
        let label = format!("{} {}", shape.color_name, shape.kind.name());
        let items = vec![LabeledImage { rgb: scene.rgb.clone(), label }];
        let proposer = SceneOracleProvider { scene: &scene };
        let out = classification_pipeline(
            &items,
            &proposer,
            &HeuristicScorer,
            &HeuristicCaptionProvider,
            1,
            1.5,
            32,
            Vocabulary::builtin(),
            16,
        )
        .unwrap();
        assert_eq!(out.samples.len(), 1);
        let s = &out.samples[0];
        assert_eq!(s.source, SampleSource::Classification);
        assert!(s.text.starts_with(&items[0].label));
        assert!(s.text.contains(", "));
    }

    /// Exhaustive scoring oracle: with two candidates, the one whose color
    /// and shape match the label must win top-1; verified by scoring both
    /// by hand and comparing.
    #[test]
    fn label_matching_candidate_wins_top1() {
        let spec = SceneSpec {
            shapes_min: 2,
            shapes_max: 2,
            kinds: vec![ShapeKind::Circle, ShapeKind::Square],
            ..SceneSpec::default()
        };
        let streams = SeedStreams::new(33);
        let scene = generate_scene(&streams, 1, &spec).unwrap();
        let target = &scene.shapes[1];
        let label = format!("{} {}", target.color_name, target.kind.name());
        let items = vec![LabeledImage { rgb: scene.rgb.clone(), label: label.clone() }];
        let proposer = SceneOracleProvider { scene: &scene };
        let scorer = HeuristicScorer;

        let out = classification_pipeline(
            &items,
            &proposer,
            &scorer,
            &HeuristicCaptionProvider,
            1,
            1.5,
            32,
            Vocabulary::builtin(),
            16,
        )
        .unwrap();
        assert_eq!(out.samples.len(), 1);

        // Brute-force both candidates through the same normalize + score
        // path and check the pipeline kept the argmax.
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, shape) in scene.shapes.iter().enumerate() {
            let (scoring, _) =
                normalize_candidate(&scene.rgb, &shape.mask, 1.5, 32).unwrap().unwrap();
            let s = scorer.score(&scoring, &label).unwrap();
            if s > best.1 {
                best = (i, s);
            }
        }
        assert_eq!(best.0, 1, "oracle says the matching shape scores higher");
        assert_eq!(out.samples[0].region_id, Some(1));
    }

    /// Selection is invariant to candidate order given distinct scores.
    #[test]
    fn selection_is_permutation_invariant() {
        struct ReversedProposer<'a> {
            scene: &'a crate::data::scene::Scene,
        }
        impl MaskProposer for ReversedProposer<'_> {
            fn propose(&self, _rgb: &Array3<f64>) -> Result<Vec<Array2<f64>>> {
                let mut m: Vec<Array2<f64>> =
                    self.scene.shapes.iter().map(|s| s.mask.clone()).collect();
                m.reverse();
                Ok(m)
            }
        }

        let spec = SceneSpec {
            shapes_min: 3,
            shapes_max: 3,
            ..SceneSpec::default()
        };
        let streams = SeedStreams::new(35);
        let scene = generate_scene(&streams, 2, &spec).unwrap();
        let target = &scene.shapes[0];
        let label = format!("{} {}", target.color_name, target.kind.name());
        let items = vec![LabeledImage { rgb: scene.rgb.clone(), label: label.clone() }];

        let run = |fwd: bool| -> RgbaSample {
            let out = if fwd {
                classification_pipeline(
                    &items,
                    &SceneOracleProvider { scene: &scene },
                    &HeuristicScorer,
                    &HeuristicCaptionProvider,
                    1,
                    1.5,
                    32,
                    Vocabulary::builtin(),
                    16,
                )
            } else {
                classification_pipeline(
                    &items,
                    &ReversedProposer { scene: &scene },
                    &HeuristicScorer,
                    &HeuristicCaptionProvider,
                    1,
                    1.5,
                    32,
                    Vocabulary::builtin(),
                    16,
                )
            };
            out.unwrap().samples.remove(0)
        };
        let a = run(true);
        let b = run(false);
        assert_eq!(a.image, b.image);
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn bad_knobs_are_input_errors() {
        let items: Vec<LabeledImage> = Vec::new();
        struct NoProposer;
        impl MaskProposer for NoProposer {
            fn propose(&self, _rgb: &Array3<f64>) -> Result<Vec<Array2<f64>>> {
                Ok(Vec::new())
            }
        }
        assert!(classification_pipeline(
            &items,
            &NoProposer,
            &HeuristicScorer,
            &HeuristicCaptionProvider,
            0,
            1.5,
            32,
            Vocabulary::builtin(),
            16
        )
        .is_err());
        assert!(classification_pipeline(
            &items,
            &NoProposer,
            &HeuristicScorer,
            &HeuristicCaptionProvider,
            1,
            0.5,
            32,
            Vocabulary::builtin(),
            16
        )
        .is_err());
    }
}
