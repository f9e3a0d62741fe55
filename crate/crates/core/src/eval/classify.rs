//! Zero-shot classification under configurable alpha levels.

use ndarray::Array2;

use crate::data::Vocabulary;
use crate::image::RgbaImage;
use crate::model::{encode_image, encode_text, Embedding, EncoderParams};
use crate::{Error, Result};

use super::dataset::EvalSet;
use super::metrics::{aggregate_metrics, ClassifyOutcome};
use super::preprocess::box_to_alpha;

/// Frozen per-class text embeddings from prompt templates.
#[derive(Debug, Clone)]
pub struct ClassPromptSet {
    pub classes: Vec<String>,
    pub embeddings: Vec<Embedding>,
}

/// The default single template.
pub const DEFAULT_TEMPLATE: &str = "a photo of a {name}";

impl ClassPromptSet {
    /// Apply each template to each class name, encode with the frozen text
    /// tower, and average multi-template embeddings back onto the unit
    /// sphere.
    pub fn build(
        classes: &[String],
        templates: &[String],
        params: &EncoderParams,
    ) -> Result<ClassPromptSet> {
        if classes.is_empty() || templates.is_empty() {
            return Err(Error::Input("classes and templates must be non-empty".into()));
        }
        let vocab = Vocabulary::builtin();
        let mut embeddings = Vec::with_capacity(classes.len());
        for class in classes {
            let mut mean = ndarray::Array1::zeros(params.config.embed);
            for template in templates {
                let prompt = template.replace("{name}", class);
                let tokens = vocab.tokenize(&prompt, params.config.context)?;
                let e = encode_text(&tokens, params)?;
                mean += &e.values;
            }
            let norm = mean.dot(&mean).sqrt();
            if norm < 1e-300 {
                return Err(Error::Numeric(format!("prompt embedding for class {class}")));
            }
            embeddings.push(Embedding { values: mean.mapv(|v| v / norm) });
        }
        Ok(ClassPromptSet { classes: classes.to_vec(), embeddings })
    }
}

/// Score precomputed image embeddings against the class set and aggregate.
pub fn classify_embeddings(
    img_embs: &[Embedding],
    labels: &[usize],
    prompts: &ClassPromptSet,
) -> Result<ClassifyOutcome> {
    let scores: Vec<Vec<f64>> = img_embs
        .iter()
        .map(|e| prompts.embeddings.iter().map(|c| e.dot(c)).collect())
        .collect();
    aggregate_metrics(&scores, labels, prompts.classes.len())
}

/// Encode labeled (image, alpha) pairs with the standard route and score.
pub fn zero_shot_classify(
    items: &[(RgbaImage, usize)],
    prompts: &ClassPromptSet,
    params: &EncoderParams,
) -> Result<ClassifyOutcome> {
    let mut embs = Vec::with_capacity(items.len());
    for (image, _) in items {
        embs.push(encode_image(image, params)?);
    }
    let labels: Vec<usize> = items.iter().map(|(_, l)| *l).collect();
    classify_embeddings(&embs, &labels, prompts)
}

/// The three alpha levels the sweep compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaLevel {
    WholeImage,
    Box,
    Mask,
}

impl AlphaLevel {
    pub fn name(self) -> &'static str {
        match self {
            AlphaLevel::WholeImage => "whole",
            AlphaLevel::Box => "box",
            AlphaLevel::Mask => "mask",
        }
    }
}

/// Alpha map for one eval region at the given level.
pub fn region_alpha(region: &super::dataset::EvalRegion, level: AlphaLevel) -> Result<Array2<f64>> {
    let (h, w) = region.mask.dim();
    Ok(match level {
        AlphaLevel::WholeImage => Array2::ones((h, w)),
        AlphaLevel::Box => box_to_alpha(&region.bbox, h, w)?,
        AlphaLevel::Mask => region.mask.clone(),
    })
}

/// Run zero-shot classification at whole-image, box, and mask alpha levels.
pub fn alpha_level_sweep(
    set: &EvalSet,
    prompts: &ClassPromptSet,
    params: &EncoderParams,
) -> Result<Vec<(AlphaLevel, ClassifyOutcome)>> {
    let mut out = Vec::new();
    for level in [AlphaLevel::WholeImage, AlphaLevel::Box, AlphaLevel::Mask] {
        let mut items = Vec::with_capacity(set.regions.len());
        for region in &set.regions {
            let alpha = region_alpha(region, level)?;
            items.push((RgbaImage::new(region.rgb.clone(), alpha)?, region.class));
        }
        out.push((level, zero_shot_classify(&items, prompts, params)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SceneSpec;
    use crate::eval::dataset::build_eval_set;
    use crate::model::ArchConfig;
    use crate::rng::SeedStreams;

    fn tiny_params() -> EncoderParams {
        let mut rng = SeedStreams::new(0).stream("init");
        EncoderParams::init(ArchConfig { image_size: 32, ..ArchConfig::tiny() }, &mut rng)
    }

    #[test]
    fn constructed_embeddings_with_all_correct_predictions_score_one() {
        use ndarray::Array1;
        let classes = vec!["red circle".to_string(), "blue square".to_string()];
        let e0 = Embedding { values: Array1::from(vec![1.0, 0.0]) };
        let e1 = Embedding { values: Array1::from(vec![0.0, 1.0]) };
        let prompts = ClassPromptSet { classes, embeddings: vec![e0.clone(), e1.clone()] };
        let outcome =
            classify_embeddings(&[e0, e1], &[0, 1], &prompts).unwrap();
        assert_eq!(outcome.top1, 1.0);
        assert_eq!(outcome.mean_per_class, 1.0);
    }

    #[test]
    fn prompt_set_embeddings_are_unit_norm_and_deterministic() {
        let params = tiny_params();
        let classes = vec!["red circle".to_string(), "green triangle".to_string()];
        let a = ClassPromptSet::build(&classes, &[DEFAULT_TEMPLATE.to_string()], &params).unwrap();
        let b = ClassPromptSet::build(&classes, &[DEFAULT_TEMPLATE.to_string()], &params).unwrap();
        for (x, y) in a.embeddings.iter().zip(b.embeddings.iter()) {
            assert_eq!(x.values, y.values);
            assert!((x.norm() - 1.0).abs() < 1e-9);
        }
    }

    /// Zero-init alpha kernel: the three sweep levels are identical.
    #[test]
    fn sweep_levels_agree_on_a_zero_init_model() {
        let params = tiny_params();
        assert!(params.alpha_kernel.iter().all(|&v| v == 0.0));
        let spec = SceneSpec::default();
        let set = build_eval_set(&spec, 5, 0, &SeedStreams::new(8)).unwrap();
        let prompts = ClassPromptSet::build(&set.classes, &[DEFAULT_TEMPLATE.to_string()], &params).unwrap();
        let sweep = alpha_level_sweep(&set, &prompts, &params).unwrap();
        assert_eq!(sweep.len(), 3);
        let whole = &sweep[0].1;
        for (_, outcome) in &sweep[1..] {
            assert_eq!(outcome.top1, whole.top1);
            assert_eq!(outcome.mean_per_class, whole.mean_per_class);
            assert_eq!(outcome.predictions, whole.predictions);
        }
    }

    /// Full-image box alpha equals the whole-image path bitwise.
    #[test]
    fn full_box_equals_whole_image_bitwise() {
        let params = tiny_params();
        let spec = SceneSpec::default();
        let set = build_eval_set(&spec, 2, 0, &SeedStreams::new(9)).unwrap();
        let region = &set.regions[0];
        let (h, w) = region.mask.dim();
        let full_box = crate::data::BoxAnnotation::new(0, 0, w, h, "");
        let via_box = RgbaImage::new(region.rgb.clone(), box_to_alpha(&full_box, h, w).unwrap()).unwrap();
        let via_ones = RgbaImage::new(region.rgb.clone(), Array2::ones((h, w))).unwrap();
        let a = encode_image(&via_box, &params).unwrap();
        let b = encode_image(&via_ones, &params).unwrap();
        assert_eq!(a.values, b.values);
    }
}
