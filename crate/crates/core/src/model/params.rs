//! Parameter containers for the dual-tower encoder.
//!
//! Tensors are stored as plain `f64` ndarrays in standard layout. A single
//! canonical visitation order (image tower, then text tower) drives the
//! optimizer, checkpoint serialization, gradient checking and the parameter
//! group partition, so every consumer sees the same named tensor list.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ArchConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl LayerNormParams {
    fn identity(dim: usize) -> Self {
        Self { gamma: Array1::ones(dim), beta: Array1::zeros(dim) }
    }

    fn zeros(dim: usize) -> Self {
        Self { gamma: Array1::zeros(dim), beta: Array1::zeros(dim) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// Fused query/key/value projection, (D, 3D).
    pub wqkv: Array2<f64>,
    pub bqkv: Array1<f64>,
    /// Output projection, (D, D).
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln1: LayerNormParams,
    pub attn: AttentionParams,
    pub ln2: LayerNormParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextParams {
    /// (vocab, D).
    pub token_embed: Array2<f64>,
    /// (context, D).
    pub pos_embed: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub ln_final: LayerNormParams,
    /// (D, E).
    pub proj: Array2<f64>,
}

/// All weights of both towers. The contrastive temperature lives in the
/// architecture config and is never visited as a tensor, so no optimizer
/// can touch it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: ArchConfig,
    /// (P*P*3, D), no bias.
    pub rgb_kernel: Array2<f64>,
    /// (P*P, D), no bias; all zeros at initialization so a fresh model
    /// ignores the alpha channel entirely.
    pub alpha_kernel: Array2<f64>,
    /// (D,).
    pub cls_token: Array1<f64>,
    /// (1+N, D).
    pub pos_embed: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub ln_post: LayerNormParams,
    /// (D, E).
    pub proj: Array2<f64>,
    pub text: TextParams,
}

fn normal_array2(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("valid normal");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

fn normal_array1(rng: &mut impl Rng, len: usize, std: f64) -> Array1<f64> {
    let dist = Normal::new(0.0, std).expect("valid normal");
    Array1::from_shape_fn(len, |_| dist.sample(rng))
}

fn block_init(rng: &mut impl Rng, dim: usize, hidden: usize, std: f64) -> BlockParams {
    BlockParams {
        ln1: LayerNormParams::identity(dim),
        attn: AttentionParams {
            wqkv: normal_array2(rng, dim, 3 * dim, std),
            bqkv: Array1::zeros(3 * dim),
            wo: normal_array2(rng, dim, dim, std),
            bo: Array1::zeros(dim),
        },
        ln2: LayerNormParams::identity(dim),
        mlp: MlpParams {
            w1: normal_array2(rng, dim, hidden, std),
            b1: Array1::zeros(hidden),
            w2: normal_array2(rng, hidden, dim, std),
            b2: Array1::zeros(dim),
        },
    }
}

fn block_zeros(dim: usize, hidden: usize) -> BlockParams {
    BlockParams {
        ln1: LayerNormParams::zeros(dim),
        attn: AttentionParams {
            wqkv: Array2::zeros((dim, 3 * dim)),
            bqkv: Array1::zeros(3 * dim),
            wo: Array2::zeros((dim, dim)),
            bo: Array1::zeros(dim),
        },
        ln2: LayerNormParams::zeros(dim),
        mlp: MlpParams {
            w1: Array2::zeros((dim, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, dim)),
            b2: Array1::zeros(dim),
        },
    }
}

impl EncoderParams {
    /// Random initialization. The alpha kernel starts at exactly zero; the
    /// trainable image tower uses a 0.02-std normal for weights, zeros for
    /// biases and identity layer norms. The text tower stays frozen, so its
    /// token table gets unit-std embeddings (and a mild positional signal):
    /// distinct captions must land on well-separated directions without any
    /// training.
    pub fn init(config: ArchConfig, rng: &mut impl Rng) -> Self {
        const STD: f64 = 0.02;
        const TEXT_EMBED_STD: f64 = 1.0;
        const TEXT_POS_STD: f64 = 0.1;
        let d = config.dim;
        let hidden = config.mlp_hidden();
        let patch_in = config.patch * config.patch * 3;
        Self {
            rgb_kernel: normal_array2(rng, patch_in, d, STD),
            alpha_kernel: Array2::zeros((config.patch * config.patch, d)),
            cls_token: normal_array1(rng, d, STD),
            pos_embed: normal_array2(rng, config.seq_len(), d, STD),
            blocks: (0..config.layers).map(|_| block_init(rng, d, hidden, STD)).collect(),
            ln_post: LayerNormParams::identity(d),
            proj: normal_array2(rng, d, config.embed, STD),
            text: TextParams {
                token_embed: normal_array2(rng, config.vocab, d, TEXT_EMBED_STD),
                pos_embed: normal_array2(rng, config.context, d, TEXT_POS_STD),
                blocks: (0..config.text_layers)
                    .map(|_| block_init(rng, d, hidden, STD))
                    .collect(),
                ln_final: LayerNormParams::identity(d),
                proj: normal_array2(rng, d, config.embed, STD),
            },
            config,
        }
    }

    /// Zero-filled container with the same shapes; used for gradients and
    /// optimizer moments.
    pub fn zeros(config: ArchConfig) -> Self {
        let d = config.dim;
        let hidden = config.mlp_hidden();
        let patch_in = config.patch * config.patch * 3;
        Self {
            rgb_kernel: Array2::zeros((patch_in, d)),
            alpha_kernel: Array2::zeros((config.patch * config.patch, d)),
            cls_token: Array1::zeros(d),
            pos_embed: Array2::zeros((config.seq_len(), d)),
            blocks: (0..config.layers).map(|_| block_zeros(d, hidden)).collect(),
            ln_post: LayerNormParams::zeros(d),
            proj: Array2::zeros((d, config.embed)),
            text: TextParams {
                token_embed: Array2::zeros((config.vocab, d)),
                pos_embed: Array2::zeros((config.context, d)),
                blocks: (0..config.text_layers).map(|_| block_zeros(d, hidden)).collect(),
                ln_final: LayerNormParams::zeros(d),
                proj: Array2::zeros((d, config.embed)),
            },
            config,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.config.temperature
    }

    /// Every tensor in canonical order as `(name, values)`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(10 + 12 * (self.blocks.len() + self.text.blocks.len()));
        out.push(("image.rgb_kernel".into(), slice2(&self.rgb_kernel)));
        out.push(("image.alpha_kernel".into(), slice2(&self.alpha_kernel)));
        out.push(("image.cls".into(), slice1(&self.cls_token)));
        out.push(("image.pos".into(), slice2(&self.pos_embed)));
        for (l, b) in self.blocks.iter().enumerate() {
            block_tensors(&format!("image.blocks.{l}"), b, &mut out);
        }
        out.push(("image.ln_post.gamma".into(), slice1(&self.ln_post.gamma)));
        out.push(("image.ln_post.beta".into(), slice1(&self.ln_post.beta)));
        out.push(("image.proj".into(), slice2(&self.proj)));
        out.push(("text.token_embed".into(), slice2(&self.text.token_embed)));
        out.push(("text.pos".into(), slice2(&self.text.pos_embed)));
        for (l, b) in self.text.blocks.iter().enumerate() {
            block_tensors(&format!("text.blocks.{l}"), b, &mut out);
        }
        out.push(("text.ln_final.gamma".into(), slice1(&self.text.ln_final.gamma)));
        out.push(("text.ln_final.beta".into(), slice1(&self.text.ln_final.beta)));
        out.push(("text.proj".into(), slice2(&self.text.proj)));
        out
    }

    /// Mutable tensor list in the same canonical order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> =
            Vec::with_capacity(10 + 12 * (self.blocks.len() + self.text.blocks.len()));
        out.push(("image.rgb_kernel".into(), slice2_mut(&mut self.rgb_kernel)));
        out.push(("image.alpha_kernel".into(), slice2_mut(&mut self.alpha_kernel)));
        out.push(("image.cls".into(), slice1_mut(&mut self.cls_token)));
        out.push(("image.pos".into(), slice2_mut(&mut self.pos_embed)));
        for (l, b) in self.blocks.iter_mut().enumerate() {
            block_tensors_mut(&format!("image.blocks.{l}"), b, &mut out);
        }
        out.push(("image.ln_post.gamma".into(), slice1_mut(&mut self.ln_post.gamma)));
        out.push(("image.ln_post.beta".into(), slice1_mut(&mut self.ln_post.beta)));
        out.push(("image.proj".into(), slice2_mut(&mut self.proj)));
        out.push(("text.token_embed".into(), slice2_mut(&mut self.text.token_embed)));
        out.push(("text.pos".into(), slice2_mut(&mut self.text.pos_embed)));
        for (l, b) in self.text.blocks.iter_mut().enumerate() {
            block_tensors_mut(&format!("text.blocks.{l}"), b, &mut out);
        }
        out.push(("text.ln_final.gamma".into(), slice1_mut(&mut self.text.ln_final.gamma)));
        out.push(("text.ln_final.beta".into(), slice1_mut(&mut self.text.ln_final.beta)));
        out.push(("text.proj".into(), slice2_mut(&mut self.text.proj)));
        out
    }

    /// Names and shapes of every tensor, in visitation order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.visit_shapes(&mut |name, shape| out.push((name.to_string(), shape)));
        out
    }

    fn visit_shapes(&self, f: &mut dyn FnMut(&str, Vec<usize>)) {
        let a2 = |a: &Array2<f64>| vec![a.dim().0, a.dim().1];
        let a1 = |a: &Array1<f64>| vec![a.dim()];
        f("image.rgb_kernel", a2(&self.rgb_kernel));
        f("image.alpha_kernel", a2(&self.alpha_kernel));
        f("image.cls", a1(&self.cls_token));
        f("image.pos", a2(&self.pos_embed));
        for (l, b) in self.blocks.iter().enumerate() {
            let p = format!("image.blocks.{l}");
            f(&format!("{p}.ln1.gamma"), a1(&b.ln1.gamma));
            f(&format!("{p}.ln1.beta"), a1(&b.ln1.beta));
            f(&format!("{p}.attn.wqkv"), a2(&b.attn.wqkv));
            f(&format!("{p}.attn.bqkv"), a1(&b.attn.bqkv));
            f(&format!("{p}.attn.wo"), a2(&b.attn.wo));
            f(&format!("{p}.attn.bo"), a1(&b.attn.bo));
            f(&format!("{p}.ln2.gamma"), a1(&b.ln2.gamma));
            f(&format!("{p}.ln2.beta"), a1(&b.ln2.beta));
            f(&format!("{p}.mlp.w1"), a2(&b.mlp.w1));
            f(&format!("{p}.mlp.b1"), a1(&b.mlp.b1));
            f(&format!("{p}.mlp.w2"), a2(&b.mlp.w2));
            f(&format!("{p}.mlp.b2"), a1(&b.mlp.b2));
        }
        f("image.ln_post.gamma", a1(&self.ln_post.gamma));
        f("image.ln_post.beta", a1(&self.ln_post.beta));
        f("image.proj", a2(&self.proj));
        f("text.token_embed", a2(&self.text.token_embed));
        f("text.pos", a2(&self.text.pos_embed));
        for (l, b) in self.text.blocks.iter().enumerate() {
            let p = format!("text.blocks.{l}");
            f(&format!("{p}.ln1.gamma"), a1(&b.ln1.gamma));
            f(&format!("{p}.ln1.beta"), a1(&b.ln1.beta));
            f(&format!("{p}.attn.wqkv"), a2(&b.attn.wqkv));
            f(&format!("{p}.attn.bqkv"), a1(&b.attn.bqkv));
            f(&format!("{p}.attn.wo"), a2(&b.attn.wo));
            f(&format!("{p}.attn.bo"), a1(&b.attn.bo));
            f(&format!("{p}.ln2.gamma"), a1(&b.ln2.gamma));
            f(&format!("{p}.ln2.beta"), a1(&b.ln2.beta));
            f(&format!("{p}.mlp.w1"), a2(&b.mlp.w1));
            f(&format!("{p}.mlp.b1"), a1(&b.mlp.b1));
            f(&format!("{p}.mlp.w2"), a2(&b.mlp.w2));
            f(&format!("{p}.mlp.b2"), a1(&b.mlp.b2));
        }
        f("text.ln_final.gamma", a1(&self.text.ln_final.gamma));
        f("text.ln_final.beta", a1(&self.text.ln_final.beta));
        f("text.proj", a2(&self.text.proj));
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, s)| s.len()).sum()
    }
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn block_tensors<'a>(prefix: &str, b: &'a BlockParams, out: &mut Vec<(String, &'a [f64])>) {
    out.push((format!("{prefix}.ln1.gamma"), slice1(&b.ln1.gamma)));
    out.push((format!("{prefix}.ln1.beta"), slice1(&b.ln1.beta)));
    out.push((format!("{prefix}.attn.wqkv"), slice2(&b.attn.wqkv)));
    out.push((format!("{prefix}.attn.bqkv"), slice1(&b.attn.bqkv)));
    out.push((format!("{prefix}.attn.wo"), slice2(&b.attn.wo)));
    out.push((format!("{prefix}.attn.bo"), slice1(&b.attn.bo)));
    out.push((format!("{prefix}.ln2.gamma"), slice1(&b.ln2.gamma)));
    out.push((format!("{prefix}.ln2.beta"), slice1(&b.ln2.beta)));
    out.push((format!("{prefix}.mlp.w1"), slice2(&b.mlp.w1)));
    out.push((format!("{prefix}.mlp.b1"), slice1(&b.mlp.b1)));
    out.push((format!("{prefix}.mlp.w2"), slice2(&b.mlp.w2)));
    out.push((format!("{prefix}.mlp.b2"), slice1(&b.mlp.b2)));
}

fn block_tensors_mut<'a>(prefix: &str, b: &'a mut BlockParams, out: &mut Vec<(String, &'a mut [f64])>) {
    out.push((format!("{prefix}.ln1.gamma"), slice1_mut(&mut b.ln1.gamma)));
    out.push((format!("{prefix}.ln1.beta"), slice1_mut(&mut b.ln1.beta)));
    out.push((format!("{prefix}.attn.wqkv"), slice2_mut(&mut b.attn.wqkv)));
    out.push((format!("{prefix}.attn.bqkv"), slice1_mut(&mut b.attn.bqkv)));
    out.push((format!("{prefix}.attn.wo"), slice2_mut(&mut b.attn.wo)));
    out.push((format!("{prefix}.attn.bo"), slice1_mut(&mut b.attn.bo)));
    out.push((format!("{prefix}.ln2.gamma"), slice1_mut(&mut b.ln2.gamma)));
    out.push((format!("{prefix}.ln2.beta"), slice1_mut(&mut b.ln2.beta)));
    out.push((format!("{prefix}.mlp.w1"), slice2_mut(&mut b.mlp.w1)));
    out.push((format!("{prefix}.mlp.b1"), slice1_mut(&mut b.mlp.b1)));
    out.push((format!("{prefix}.mlp.w2"), slice2_mut(&mut b.mlp.w2)));
    out.push((format!("{prefix}.mlp.b2"), slice1_mut(&mut b.mlp.b2)));
}
