//! Corpus assembly: generated scenes run through the grounding pipeline,
//! yielding a region pool and a whole-image pool.

use crate::data::tokenizer::Vocabulary;
use crate::image::RgbaImage;
use crate::rng::SeedStreams;
use crate::Result;

use super::grounding::grounding_pipeline;
use super::providers::SceneOracleProvider;
use super::sample::{BoxAnnotation, RgbaSample, SampleSource};
use super::scene::{generate_scene, Scene, SceneSpec};

#[derive(Debug, Clone)]
pub struct Corpus {
    pub region: Vec<RgbaSample>,
    pub whole: Vec<RgbaSample>,
}

/// Generate `n_scenes` scenes on the named stream and convert each into one
/// whole-image sample plus one grounding sample per region (oracle masks).
pub fn build_corpus(
    spec: &SceneSpec,
    n_scenes: usize,
    streams: &SeedStreams,
    context: usize,
) -> Result<Corpus> {
    let vocab = Vocabulary::builtin();
    let mut region = Vec::new();
    let mut whole = Vec::new();
    for idx in 0..n_scenes {
        let scene = generate_scene(streams, idx as u64, spec)?;
        let anns: Vec<BoxAnnotation> = scene.shapes.iter().map(|s| s.bbox.clone()).collect();
        let provider = SceneOracleProvider { scene: &scene };
        let out = grounding_pipeline(&scene.rgb, &anns, &provider, 1, vocab, context)?;
        region.extend(out.samples);
        whole.push(whole_sample(&scene, context)?);
    }
    Ok(Corpus { region, whole })
}

/// The scene as a whole-image sample: alpha all ones, enumerating caption.
pub fn whole_sample(scene: &Scene, context: usize) -> Result<RgbaSample> {
    let vocab = Vocabulary::builtin();
    let image = RgbaImage::with_full_alpha(scene.rgb.clone())?;
    let tokens = vocab.tokenize(&scene.whole_caption, context)?;
    RgbaSample::new(image, scene.whole_caption.clone(), tokens, SampleSource::WholeImage, None)
}
