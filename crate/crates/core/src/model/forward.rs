//! Forward passes of the image and text towers.
//!
//! Both towers share the same pre-norm transformer block. The image tower
//! embeds patches through two parallel first-layer convolutions (RGB and
//! alpha) whose outputs are summed; the alpha kernel is zero at init so the
//! fresh model ignores the focus map. Encoding routes cover the plain
//! model plus the two masking baselines that reuse the same code path, so
//! the "mask of all ones equals the unmasked encode" contracts hold bitwise
//! by construction.

use ndarray::{s, Array1, Array2};

use crate::image::RgbaImage;
use crate::mask::PooledMask;
use crate::{Error, Result};

use super::config::ArchConfig;
use super::params::{AttentionParams, BlockParams, EncoderParams, LayerNormParams};

pub(crate) const LN_EPS: f64 = 1e-5;
/// Additive constant standing in for minus infinity in attention logits.
pub(crate) const ATTN_MASK_NEG: f64 = -1e9;

/// Unit-norm joint embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Array1<f64>,
}

impl Embedding {
    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values.dot(&other.values)
    }

    pub fn norm(&self) -> f64 {
        self.values.dot(&self.values).sqrt()
    }
}

/// Post-softmax CLS-row attention weights of the final block, one row per
/// head; each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    /// (heads, 1+N).
    pub weights: Array2<f64>,
}

impl AttentionMap {
    /// Weights over patch tokens only, reshaped to the feature grid.
    pub fn head_grid(&self, head: usize, cfg: &ArchConfig) -> Array2<f64> {
        let g = cfg.grid();
        let row = self.weights.row(head);
        Array2::from_shape_fn((g, g), |(i, j)| row[1 + i * g + j])
    }
}

/// How an image is pushed through the tower.
#[derive(Debug, Clone, Copy)]
pub enum ImageRoute<'a> {
    /// RGB conv + alpha conv (the model proper).
    Standard,
    /// RGB conv only; the alpha map is not consumed at all.
    RgbOnly,
    /// Standard embed, but in the final block the CLS query may only attend
    /// to foreground patch tokens (and itself).
    MaskedLastAttention(&'a PooledMask),
    /// RGB-only embed with background patch tokens zeroed before the blocks.
    FeatureMasked(&'a PooledMask),
}

// ---------------------------------------------------------------------------
// Shared primitives
// ---------------------------------------------------------------------------

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn quick_gelu(x: f64) -> f64 {
    x * sigmoid(1.702 * x)
}

pub(crate) fn quick_gelu_grad(x: f64) -> f64 {
    let s = sigmoid(1.702 * x);
    s + 1.702 * x * s * (1.0 - s)
}

#[derive(Debug, Clone)]
pub(crate) struct LnCache {
    /// Normalized activations before scale/shift, (T, D).
    pub xhat: Array2<f64>,
    /// Reciprocal standard deviation per row.
    pub rstd: Array1<f64>,
}

pub(crate) fn layer_norm_rows(x: &Array2<f64>, ln: &LayerNormParams) -> (Array2<f64>, LnCache) {
    let (t, d) = x.dim();
    let mut xhat = Array2::zeros((t, d));
    let mut rstd = Array1::zeros(t);
    let mut out = Array2::zeros((t, d));
    for r in 0..t {
        let row = x.row(r);
        let mean = row.sum() / d as f64;
        let mut var = 0.0;
        for &v in row {
            let c = v - mean;
            var += c * c;
        }
        var /= d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let xh = (x[[r, c]] - mean) * rs;
            xhat[[r, c]] = xh;
            out[[r, c]] = xh * ln.gamma[c] + ln.beta[c];
        }
    }
    (out, LnCache { xhat, rstd })
}

fn softmax_row_in_place(row: &mut ndarray::ArrayViewMut1<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BlockCache {
    pub ln1: LnCache,
    /// ln1 output, (T, D).
    pub h: Array2<f64>,
    /// Fused projections, (T, 3D).
    pub qkv: Array2<f64>,
    /// Post-softmax attention per head, (T, T) each.
    pub probs: Vec<Array2<f64>>,
    /// Concatenated head outputs before the output projection, (T, D).
    pub o_cat: Array2<f64>,
    pub ln2: LnCache,
    /// ln2 output, (T, D).
    pub h2: Array2<f64>,
    /// MLP pre-activation, (T, H).
    pub u: Array2<f64>,
    /// MLP activation output, (T, H).
    pub g: Array2<f64>,
}

/// Token indices the CLS query must not attend to (final block only).
type ClsMask<'a> = Option<&'a [bool]>;

fn attention_forward(
    h: &Array2<f64>,
    p: &AttentionParams,
    heads: usize,
    cls_mask: ClsMask,
) -> (Array2<f64>, Array2<f64>, Vec<Array2<f64>>, Array2<f64>) {
    let (t, d) = h.dim();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut qkv = h.dot(&p.wqkv);
    for mut row in qkv.rows_mut() {
        row += &p.bqkv;
    }

    let mut o_cat = Array2::zeros((t, d));
    let mut probs = Vec::with_capacity(heads);
    for head in 0..heads {
        let q = qkv.slice(s![.., head * dh..(head + 1) * dh]);
        let k = qkv.slice(s![.., d + head * dh..d + (head + 1) * dh]);
        let v = qkv.slice(s![.., 2 * d + head * dh..2 * d + (head + 1) * dh]);
        let mut scores = q.dot(&k.t());
        scores.mapv_inplace(|x| x * scale);
        if let Some(mask) = cls_mask {
            for (j, &masked) in mask.iter().enumerate() {
                if masked {
                    scores[[0, j]] += ATTN_MASK_NEG;
                }
            }
        }
        for mut row in scores.rows_mut() {
            softmax_row_in_place(&mut row);
        }
        let o = scores.dot(&v);
        o_cat.slice_mut(s![.., head * dh..(head + 1) * dh]).assign(&o);
        probs.push(scores);
    }

    let mut attn_out = o_cat.dot(&p.wo);
    for mut row in attn_out.rows_mut() {
        row += &p.bo;
    }
    (attn_out, qkv, probs, o_cat)
}

pub(crate) fn block_forward(
    x: &Array2<f64>,
    block: &BlockParams,
    heads: usize,
    cls_mask: ClsMask,
    want_cache: bool,
) -> (Array2<f64>, Option<BlockCache>) {
    let (h, ln1) = layer_norm_rows(x, &block.ln1);
    let (attn_out, qkv, probs, o_cat) = attention_forward(&h, &block.attn, heads, cls_mask);
    let x_mid = x + &attn_out;

    let (h2, ln2) = layer_norm_rows(&x_mid, &block.ln2);
    let mut u = h2.dot(&block.mlp.w1);
    for mut row in u.rows_mut() {
        row += &block.mlp.b1;
    }
    let g = u.mapv(quick_gelu);
    let mut m = g.dot(&block.mlp.w2);
    for mut row in m.rows_mut() {
        row += &block.mlp.b2;
    }
    let x_out = &x_mid + &m;

    let cache = if want_cache {
        Some(BlockCache { ln1, h, qkv, probs, o_cat, ln2, h2, u, g })
    } else {
        None
    };
    (x_out, cache)
}

fn ensure_finite(x: &Array2<f64>, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(what.to_string()));
    }
    Ok(())
}

/// Project, L2-normalize, and package the pooled token.
fn head_and_normalize(
    pooled: &Array1<f64>,
    ln: &LayerNormParams,
    proj: &Array2<f64>,
    what: &str,
) -> Result<(Embedding, HeadCache)> {
    let pooled_m = pooled.view().insert_axis(ndarray::Axis(0)).to_owned();
    let (y_m, ln_cache) = layer_norm_rows(&pooled_m, ln);
    let y = y_m.row(0).to_owned();
    let e = y.dot(proj);
    let norm = e.dot(&e).sqrt();
    if !norm.is_finite() || norm < 1e-300 {
        return Err(Error::Numeric(format!("{what} projection norm")));
    }
    let emb = Embedding { values: e.mapv(|v| v / norm) };
    Ok((emb, HeadCache { ln: ln_cache, y, e, norm }))
}

#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    /// Final layer-norm cache over the single pooled row.
    pub ln: LnCache,
    /// Post-norm pooled token, (D,).
    pub y: Array1<f64>,
    /// Pre-normalization projection, (E,).
    pub e: Array1<f64>,
    pub norm: f64,
}

// ---------------------------------------------------------------------------
// Image tower
// ---------------------------------------------------------------------------

/// Flatten all P x P patches into rows: (N, P*P*3), pixel-major then channel.
pub(crate) fn patch_matrix_rgb(image: &RgbaImage, patch: usize) -> Array2<f64> {
    let (h, w, _) = image.rgb.dim();
    let (gh, gw) = (h / patch, w / patch);
    let mut m = Array2::zeros((gh * gw, patch * patch * 3));
    for gi in 0..gh {
        for gj in 0..gw {
            let row = gi * gw + gj;
            let mut col = 0;
            for py in 0..patch {
                for px in 0..patch {
                    for c in 0..3 {
                        m[[row, col]] = image.rgb[[gi * patch + py, gj * patch + px, c]];
                        col += 1;
                    }
                }
            }
        }
    }
    m
}

pub(crate) fn patch_matrix_alpha(image: &RgbaImage, patch: usize) -> Array2<f64> {
    let (h, w) = image.alpha.dim();
    let (gh, gw) = (h / patch, w / patch);
    let mut m = Array2::zeros((gh * gw, patch * patch));
    for gi in 0..gh {
        for gj in 0..gw {
            let row = gi * gw + gj;
            let mut col = 0;
            for py in 0..patch {
                for px in 0..patch {
                    m[[row, col]] = image.alpha[[gi * patch + py, gj * patch + px]];
                    col += 1;
                }
            }
        }
    }
    m
}

fn check_image_dims(image: &RgbaImage, cfg: &ArchConfig) -> Result<()> {
    let (h, w, _) = image.rgb.dim();
    if h != cfg.image_size || w != cfg.image_size {
        return Err(Error::Shape(format!(
            "image is {h}x{w}, model expects {0}x{0}",
            cfg.image_size
        )));
    }
    Ok(())
}

/// Dual-conv patch embedding: RGB patches and alpha patches each flattened
/// and projected, outputs summed. With the alpha kernel at zero this equals
/// the RGB-only embedding exactly.
pub fn patch_embed_rgba(image: &RgbaImage, params: &EncoderParams) -> Result<Array2<f64>> {
    check_image_dims(image, &params.config)?;
    let p = params.config.patch;
    let rgb = patch_matrix_rgb(image, p).dot(&params.rgb_kernel);
    let alpha = patch_matrix_alpha(image, p).dot(&params.alpha_kernel);
    Ok(rgb + alpha)
}

/// RGB-kernel-only patch embedding (used by the feature-masking baseline).
pub fn patch_embed_rgb_only(image: &RgbaImage, params: &EncoderParams) -> Result<Array2<f64>> {
    check_image_dims(image, &params.config)?;
    Ok(patch_matrix_rgb(image, params.config.patch).dot(&params.rgb_kernel))
}

/// How the final token matrix reduces to one vector for the output head.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Pooling {
    /// A single row (the image tower's CLS token).
    Row(usize),
    /// Mean over the first `n` rows (the text tower's provided tokens).
    /// With a frozen text tower the pooled vector must carry token content
    /// directly rather than relying on attention mixing.
    MeanPrefix(usize),
}

pub(crate) struct TowerCache {
    pub blocks: Vec<BlockCache>,
    pub head: HeadCache,
    /// Patch matrices for the kernel gradients (image tower only).
    pub patches_rgb: Option<Array2<f64>>,
    pub patches_alpha: Option<Array2<f64>>,
    /// Token ids (text tower only).
    pub padded_ids: Option<Vec<u32>>,
    pub pooling: Pooling,
}

pub(crate) struct ImageForward {
    pub emb: Embedding,
    pub cache: Option<TowerCache>,
    pub attn: Option<AttentionMap>,
}

fn pooled_to_cls_mask(m: &PooledMask, cfg: &ArchConfig) -> Result<Vec<bool>> {
    if m.grid_h() != cfg.grid() || m.grid_w() != cfg.grid() {
        return Err(Error::Shape(format!(
            "pooled mask {}x{} does not match token grid {}x{}",
            m.grid_h(),
            m.grid_w(),
            cfg.grid(),
            cfg.grid()
        )));
    }
    if !m.any_foreground() {
        return Err(Error::Input("mask has no foreground tokens".into()));
    }
    // Token 0 is CLS and never masked.
    let mut mask = vec![false; cfg.seq_len()];
    for (idx, &v) in m.m.iter().enumerate() {
        mask[1 + idx] = v == 0;
    }
    Ok(mask)
}

pub(crate) fn image_forward(
    image: &RgbaImage,
    params: &EncoderParams,
    route: ImageRoute,
    want_cache: bool,
    want_attn: bool,
) -> Result<ImageForward> {
    let cfg = &params.config;
    if want_cache && !matches!(route, ImageRoute::Standard) {
        return Err(Error::Input("gradient caching supports the standard route only".into()));
    }

    let mut tokens = match route {
        ImageRoute::Standard | ImageRoute::MaskedLastAttention(_) => patch_embed_rgba(image, params)?,
        ImageRoute::RgbOnly | ImageRoute::FeatureMasked(_) => patch_embed_rgb_only(image, params)?,
    };

    let last_cls_mask: Option<Vec<bool>> = match route {
        ImageRoute::MaskedLastAttention(m) => Some(pooled_to_cls_mask(m, cfg)?),
        ImageRoute::FeatureMasked(m) => {
            let cls_mask = pooled_to_cls_mask(m, cfg)?;
            for (idx, &masked) in cls_mask[1..].iter().enumerate() {
                if masked {
                    tokens.row_mut(idx).fill(0.0);
                }
            }
            None
        }
        _ => None,
    };

    let t = cfg.seq_len();
    let mut x = Array2::zeros((t, cfg.dim));
    x.row_mut(0).assign(&params.cls_token);
    x.slice_mut(s![1.., ..]).assign(&tokens);
    x += &params.pos_embed;

    let mut block_caches = Vec::new();
    let mut last_probs: Option<Vec<Array2<f64>>> = None;
    for (l, block) in params.blocks.iter().enumerate() {
        let is_last = l + 1 == params.blocks.len();
        let cls_mask = if is_last { last_cls_mask.as_deref() } else { None };
        let (x_next, cache) = block_forward(&x, block, cfg.heads, cls_mask, want_cache || (want_attn && is_last));
        x = x_next;
        ensure_finite(&x, &format!("image block {l}"))?;
        if let Some(c) = cache {
            if want_attn && is_last {
                last_probs = Some(c.probs.clone());
            }
            if want_cache {
                block_caches.push(c);
            }
        }
    }

    let pooled = x.row(0).to_owned();
    let (emb, head) = head_and_normalize(&pooled, &params.ln_post, &params.proj, "image")?;

    let attn = last_probs.map(|probs| {
        let mut weights = Array2::zeros((cfg.heads, t));
        for (h, p) in probs.iter().enumerate() {
            weights.row_mut(h).assign(&p.row(0));
        }
        AttentionMap { weights }
    });

    let cache = want_cache.then(|| TowerCache {
        blocks: block_caches,
        head,
        patches_rgb: Some(patch_matrix_rgb(image, cfg.patch)),
        patches_alpha: Some(patch_matrix_alpha(image, cfg.patch)),
        padded_ids: None,
        pooling: Pooling::Row(0),
    });

    Ok(ImageForward { emb, cache, attn })
}

/// Encode an RGBA image to the joint space (CLS token, final norm,
/// projection, L2 normalization).
pub fn encode_image(image: &RgbaImage, params: &EncoderParams) -> Result<Embedding> {
    Ok(image_forward(image, params, ImageRoute::Standard, false, false)?.emb)
}

/// Encode via an explicit route.
pub fn encode_image_route(
    image: &RgbaImage,
    params: &EncoderParams,
    route: ImageRoute,
) -> Result<Embedding> {
    Ok(image_forward(image, params, route, false, false)?.emb)
}

/// Attention-guided baseline: the final block's CLS query attends only to
/// foreground patch tokens. With an all-ones mask this equals
/// [`encode_image`] bitwise.
pub fn masked_last_attention_encode(
    image: &RgbaImage,
    m: &PooledMask,
    params: &EncoderParams,
) -> Result<Embedding> {
    encode_image_route(image, params, ImageRoute::MaskedLastAttention(m))
}

/// Feature-level masking baseline: RGB-only patch embedding with background
/// tokens zeroed before the transformer. With an all-ones mask this equals
/// the RGB-only encode bitwise.
pub fn feature_masked_encode(
    image: &RgbaImage,
    m: &PooledMask,
    params: &EncoderParams,
) -> Result<Embedding> {
    encode_image_route(image, params, ImageRoute::FeatureMasked(m))
}

/// Per-head post-softmax CLS-row attention weights of the final block.
pub fn extract_cls_attention(image: &RgbaImage, params: &EncoderParams) -> Result<AttentionMap> {
    let fwd = image_forward(image, params, ImageRoute::Standard, false, true)?;
    fwd.attn.ok_or_else(|| Error::Numeric("attention capture missing".into()))
}

// ---------------------------------------------------------------------------
// Text tower
// ---------------------------------------------------------------------------

pub(crate) struct TextForward {
    pub emb: Embedding,
    pub cache: Option<TowerCache>,
}

pub(crate) fn text_forward(
    tokens: &[u32],
    params: &EncoderParams,
    want_cache: bool,
) -> Result<TextForward> {
    let cfg = &params.config;
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if tokens.len() > cfg.context {
        return Err(Error::Input(format!(
            "sequence length {} exceeds context {}",
            tokens.len(),
            cfg.context
        )));
    }
    for &id in tokens {
        if id as usize >= cfg.vocab {
            return Err(Error::Input(format!(
                "token id {id} outside vocabulary of size {}",
                cfg.vocab
            )));
        }
    }

    // Fixed-length sequence: trailing positions carry the pad embedding.
    let mut padded: Vec<u32> = Vec::with_capacity(cfg.context);
    padded.extend_from_slice(tokens);
    padded.resize(cfg.context, crate::data::tokenizer::PAD);

    let mut x = Array2::zeros((cfg.context, cfg.dim));
    for (p, &id) in padded.iter().enumerate() {
        let emb_row = params.text.token_embed.row(id as usize);
        for c in 0..cfg.dim {
            x[[p, c]] = emb_row[c] + params.text.pos_embed[[p, c]];
        }
    }

    let mut block_caches = Vec::new();
    for (l, block) in params.text.blocks.iter().enumerate() {
        let (x_next, cache) = block_forward(&x, block, cfg.heads, None, want_cache);
        x = x_next;
        ensure_finite(&x, &format!("text block {l}"))?;
        if let Some(c) = cache {
            block_caches.push(c);
        }
    }

    // Mean-pool over the provided tokens (pads excluded).
    let n = tokens.len();
    let mut pooled = Array1::zeros(cfg.dim);
    for p in 0..n {
        pooled += &x.row(p);
    }
    pooled.mapv_inplace(|v| v / n as f64);
    let (emb, head) = head_and_normalize(&pooled, &params.text.ln_final, &params.text.proj, "text")?;

    let cache = want_cache.then(|| TowerCache {
        blocks: block_caches,
        head,
        patches_rgb: None,
        patches_alpha: None,
        padded_ids: Some(padded),
        pooling: Pooling::MeanPrefix(n),
    });
    Ok(TextForward { emb, cache })
}

/// Encode a token sequence to the joint space; pooled at the last provided
/// token, deterministic for identical inputs.
pub fn encode_text(tokens: &[u32], params: &EncoderParams) -> Result<Embedding> {
    Ok(text_forward(tokens, params, false)?.emb)
}

/// Patch tokens after route-specific masking, before CLS/positional
/// embedding. Exposed for the window-max oracle test.
#[cfg(test)]
pub(crate) fn tokens_for_test(
    image: &RgbaImage,
    params: &EncoderParams,
    route: ImageRoute,
) -> Result<Array2<f64>> {
    let cfg = &params.config;
    let mut tokens = match route {
        ImageRoute::Standard | ImageRoute::MaskedLastAttention(_) => patch_embed_rgba(image, params)?,
        ImageRoute::RgbOnly | ImageRoute::FeatureMasked(_) => patch_embed_rgb_only(image, params)?,
    };
    if let ImageRoute::FeatureMasked(m) = route {
        let cls_mask = pooled_to_cls_mask(m, cfg)?;
        for (idx, &masked) in cls_mask[1..].iter().enumerate() {
            if masked {
                tokens.row_mut(idx).fill(0.0);
            }
        }
    }
    Ok(tokens)
}
