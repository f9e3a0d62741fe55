//! RGBA region-text data: the synthetic scene corpus, the grounding and
//! classification pipelines over pluggable providers, training-time
//! sampling, and the shard format.

pub mod classification;
pub mod corpus;
pub mod grounding;
pub mod providers;
pub mod sample;
pub mod sampling;
pub mod scene;
pub mod shard;
pub mod tokenizer;

pub use classification::{classification_pipeline, ClassificationOutput, LabeledImage};
pub use corpus::{build_corpus, whole_sample, Corpus};
pub use grounding::{grounding_pipeline, GroundingOutput};
pub use providers::{
    BoxFillProvider, CaptionProvider, HeuristicCaptionProvider, HeuristicScorer, MaskProposer,
    MaskProvider, RegionScorer, SceneOracleProvider,
};
pub use sample::{BoxAnnotation, RgbaSample, SampleSource};
pub use sampling::sample_training_batch;
pub use scene::{generate_scene, OverlapPolicy, Scene, SceneShape, SceneSpec, ShapeKind};
pub use shard::{shard_bytes, shard_from_bytes, shard_read, shard_write};
pub use tokenizer::Vocabulary;
