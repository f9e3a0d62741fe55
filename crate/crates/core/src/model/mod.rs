//! The dual-tower encoder: RGBA-aware ViT image tower, text transformer,
//! contrastive loss, and the attention-level baselines.

mod backward;
mod config;
mod forward;
mod loss;
mod params;

pub use config::ArchConfig;
pub use forward::{
    encode_image, encode_image_route, encode_text, extract_cls_attention, feature_masked_encode,
    masked_last_attention_encode, patch_embed_rgb_only, patch_embed_rgba, AttentionMap, Embedding,
    ImageRoute,
};
pub use loss::{contrastive_loss, contrastive_loss_value, ContrastiveLoss};
pub use params::{AttentionParams, BlockParams, EncoderParams, LayerNormParams, MlpParams, TextParams};

pub(crate) use backward::{image_backward, text_backward};
pub(crate) use forward::{image_forward, text_forward};

use crate::image::RgbaImage;
use crate::Result;

/// One training pair: an image with focus map and its caption tokens.
#[derive(Debug, Clone)]
pub struct Pair {
    pub image: RgbaImage,
    pub tokens: Vec<u32>,
}

/// Loss over a batch of pairs (no gradients).
pub fn batch_loss(params: &EncoderParams, batch: &[Pair]) -> Result<f64> {
    let mut img = Vec::with_capacity(batch.len());
    let mut txt = Vec::with_capacity(batch.len());
    for pair in batch {
        img.push(encode_image(&pair.image, params)?);
        txt.push(encode_text(&pair.tokens, params)?);
    }
    contrastive_loss_value(&img, &txt, params.temperature())
}

/// Loss and parameter gradients over a batch of pairs. The forward passes
/// keep per-sample caches; the loss gradient is then pushed back through
/// each sample in batch order, so accumulation order is deterministic.
pub fn batch_loss_and_grads(params: &EncoderParams, batch: &[Pair]) -> Result<(f64, EncoderParams)> {
    let mut img_fwd = Vec::with_capacity(batch.len());
    let mut txt_fwd = Vec::with_capacity(batch.len());
    for pair in batch {
        img_fwd.push(image_forward(&pair.image, params, ImageRoute::Standard, true, false)?);
        txt_fwd.push(text_forward(&pair.tokens, params, true)?);
    }
    let img_embs: Vec<Embedding> = img_fwd.iter().map(|f| f.emb.clone()).collect();
    let txt_embs: Vec<Embedding> = txt_fwd.iter().map(|f| f.emb.clone()).collect();
    let out = contrastive_loss(&img_embs, &txt_embs, params.temperature())?;

    let mut grads = EncoderParams::zeros(params.config.clone());
    for (i, fwd) in img_fwd.iter().enumerate() {
        let cache = fwd.cache.as_ref().expect("cached forward");
        image_backward(&out.d_img[i], cache, params, &mut grads);
    }
    for (i, fwd) in txt_fwd.iter().enumerate() {
        let cache = fwd.cache.as_ref().expect("cached forward");
        text_backward(&out.d_txt[i], cache, params, &mut grads);
    }
    Ok((out.loss, grads))
}
