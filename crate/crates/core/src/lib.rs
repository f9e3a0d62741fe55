//! Region-focused contrastive vision-language learning at desk scale.
//!
//! A dual-tower image/text encoder whose image tower takes a per-pixel
//! focus (alpha) map through a zero-initialized parallel patch convolution,
//! the training recipe that teaches region focus without losing whole-image
//! recognition, synthetic RGBA region-text data pipelines, and the
//! evaluation protocols and masking baselines to compare against.

pub mod data;
pub mod error;
pub mod eval;
pub mod image;
pub mod io_util;
pub mod mask;
pub mod model;
pub mod rng;
pub mod train;
pub mod viz;

pub use error::{Error, ErrorCategory, Result};
pub use image::RgbaImage;
pub use mask::{pool_mask, PooledMask};
pub use model::{ArchConfig, AttentionMap, Embedding, EncoderParams};
pub use rng::SeedStreams;
