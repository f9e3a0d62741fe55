//! Hand-written reverse passes mirroring `forward.rs`.
//!
//! Gradients accumulate into an `EncoderParams` used as a same-shaped
//! container, so the optimizer can walk parameters and gradients with one
//! visitation order. Verified end to end against central finite differences
//! (see `training::gradcheck`).

use ndarray::{s, Array1, Array2};

use super::forward::{quick_gelu_grad, BlockCache, LnCache, Pooling, TowerCache};
use super::params::{BlockParams, EncoderParams, LayerNormParams};

/// Backward through a row-wise layer norm. Returns dx and accumulates
/// parameter gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    ln: &LayerNormParams,
    dgamma: &mut Array1<f64>,
    dbeta: &mut Array1<f64>,
) -> Array2<f64> {
    let (t, d) = dy.dim();
    let mut dx = Array2::zeros((t, d));
    for r in 0..t {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for c in 0..d {
            let dxh = dy[[r, c]] * ln.gamma[c];
            m1 += dxh;
            m2 += dxh * cache.xhat[[r, c]];
            dgamma[c] += dy[[r, c]] * cache.xhat[[r, c]];
            dbeta[c] += dy[[r, c]];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        let rs = cache.rstd[r];
        for c in 0..d {
            let dxh = dy[[r, c]] * ln.gamma[c];
            dx[[r, c]] = rs * (dxh - m1 - cache.xhat[[r, c]] * m2);
        }
    }
    dx
}

fn add_col_sums(dst: &mut Array1<f64>, src: &Array2<f64>) {
    for row in src.rows() {
        *dst += &row;
    }
}

/// Backward through one transformer block. `dx_out` is the gradient at the
/// block output; returns the gradient at the block input.
fn block_backward(
    dx_out: &Array2<f64>,
    block: &BlockParams,
    grads: &mut BlockParams,
    cache: &BlockCache,
    heads: usize,
) -> Array2<f64> {
    let (t, d) = dx_out.dim();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // MLP branch: x_out = x_mid + mlp(ln2(x_mid)).
    let dm = dx_out;
    let dg = dm.dot(&block.mlp.w2.t());
    grads.mlp.w2 += &cache.g.t().dot(dm);
    add_col_sums(&mut grads.mlp.b2, dm);
    let mut du = dg;
    du.zip_mut_with(&cache.u, |g, &u| *g *= quick_gelu_grad(u));
    let dh2 = du.dot(&block.mlp.w1.t());
    grads.mlp.w1 += &cache.h2.t().dot(&du);
    add_col_sums(&mut grads.mlp.b1, &du);

    let mut dx_mid = dx_out.clone();
    dx_mid += &layer_norm_backward(&dh2, &cache.ln2, &block.ln2, &mut grads.ln2.gamma, &mut grads.ln2.beta);

    // Attention branch: x_mid = x_in + attn(ln1(x_in)).
    let dattn_out = &dx_mid;
    let do_cat = dattn_out.dot(&block.attn.wo.t());
    grads.attn.wo += &cache.o_cat.t().dot(dattn_out);
    add_col_sums(&mut grads.attn.bo, dattn_out);

    let mut dqkv = Array2::zeros((t, 3 * d));
    for head in 0..heads {
        let q = cache.qkv.slice(s![.., head * dh..(head + 1) * dh]);
        let k = cache.qkv.slice(s![.., d + head * dh..d + (head + 1) * dh]);
        let v = cache.qkv.slice(s![.., 2 * d + head * dh..2 * d + (head + 1) * dh]);
        let probs = &cache.probs[head];
        let d_oh = do_cat.slice(s![.., head * dh..(head + 1) * dh]);

        let d_a = d_oh.dot(&v.t());
        let d_v = probs.t().dot(&d_oh);

        // Softmax rows: dS = A .* (dA - rowsum(dA .* A)).
        let mut d_s = Array2::zeros((t, t));
        for r in 0..t {
            let mut dot = 0.0;
            for c in 0..t {
                dot += d_a[[r, c]] * probs[[r, c]];
            }
            for c in 0..t {
                d_s[[r, c]] = probs[[r, c]] * (d_a[[r, c]] - dot);
            }
        }

        let mut d_q = d_s.dot(&k);
        d_q.mapv_inplace(|x| x * scale);
        let mut d_k = d_s.t().dot(&q);
        d_k.mapv_inplace(|x| x * scale);

        dqkv.slice_mut(s![.., head * dh..(head + 1) * dh]).assign(&d_q);
        dqkv.slice_mut(s![.., d + head * dh..d + (head + 1) * dh]).assign(&d_k);
        dqkv.slice_mut(s![.., 2 * d + head * dh..2 * d + (head + 1) * dh]).assign(&d_v);
    }

    let dh1 = dqkv.dot(&block.attn.wqkv.t());
    grads.attn.wqkv += &cache.h.t().dot(&dqkv);
    add_col_sums(&mut grads.attn.bqkv, &dqkv);

    let mut dx_in = dx_mid.clone();
    dx_in += &layer_norm_backward(&dh1, &cache.ln1, &block.ln1, &mut grads.ln1.gamma, &mut grads.ln1.beta);
    dx_in
}

/// Backward through the output head (final norm, projection, L2
/// normalization) shared by both towers. Returns the gradient at the pooled
/// pre-norm token.
fn head_backward(
    d_emb: &Array1<f64>,
    cache: &TowerCache,
    ln: &LayerNormParams,
    proj: &Array2<f64>,
    dln_gamma: &mut Array1<f64>,
    dln_beta: &mut Array1<f64>,
    dproj: &mut Array2<f64>,
) -> Array1<f64> {
    let head = &cache.head;
    // emb = e / ||e||  =>  de = (d_emb - emb (emb . d_emb)) / ||e||.
    let emb = head.e.mapv(|v| v / head.norm);
    let coeff = emb.dot(d_emb);
    let mut de = d_emb.clone();
    de.scaled_add(-coeff, &emb);
    de.mapv_inplace(|v| v / head.norm);

    // e = y . proj.
    let dy = proj.dot(&de);
    for (r, &yv) in head.y.iter().enumerate() {
        for (c, &dev) in de.iter().enumerate() {
            dproj[[r, c]] += yv * dev;
        }
    }

    let dy_m = dy.insert_axis(ndarray::Axis(0));
    let dpooled = layer_norm_backward(&dy_m, &head.ln, ln, dln_gamma, dln_beta);
    dpooled.row(0).to_owned()
}

fn spread_pool_grad(dx: &mut Array2<f64>, dpooled: &Array1<f64>, pooling: Pooling) {
    match pooling {
        Pooling::Row(r) => dx.row_mut(r).assign(dpooled),
        Pooling::MeanPrefix(n) => {
            let scaled = dpooled.mapv(|v| v / n as f64);
            for r in 0..n {
                dx.row_mut(r).assign(&scaled);
            }
        }
    }
}

/// Accumulate gradients of the image tower for one sample.
pub(crate) fn image_backward(
    d_emb: &Array1<f64>,
    cache: &TowerCache,
    params: &EncoderParams,
    grads: &mut EncoderParams,
) {
    let cfg = &params.config;
    let t = cfg.seq_len();

    let dpooled = head_backward(
        d_emb,
        cache,
        &params.ln_post,
        &params.proj,
        &mut grads.ln_post.gamma,
        &mut grads.ln_post.beta,
        &mut grads.proj,
    );

    let mut dx = Array2::zeros((t, cfg.dim));
    spread_pool_grad(&mut dx, &dpooled, cache.pooling);

    for (l, block) in params.blocks.iter().enumerate().rev() {
        dx = block_backward(&dx, block, &mut grads.blocks[l], &cache.blocks[l], cfg.heads);
    }

    grads.pos_embed += &dx;
    grads.cls_token += &dx.row(0);
    let dtokens = dx.slice(s![1.., ..]);
    let p_rgb = cache.patches_rgb.as_ref().expect("image cache has patches");
    let p_alpha = cache.patches_alpha.as_ref().expect("image cache has patches");
    grads.rgb_kernel += &p_rgb.t().dot(&dtokens);
    grads.alpha_kernel += &p_alpha.t().dot(&dtokens);
}

/// Accumulate gradients of the text tower for one sample.
pub(crate) fn text_backward(
    d_emb: &Array1<f64>,
    cache: &TowerCache,
    params: &EncoderParams,
    grads: &mut EncoderParams,
) {
    let cfg = &params.config;

    let dpooled = head_backward(
        d_emb,
        cache,
        &params.text.ln_final,
        &params.text.proj,
        &mut grads.text.ln_final.gamma,
        &mut grads.text.ln_final.beta,
        &mut grads.text.proj,
    );

    let mut dx = Array2::zeros((cfg.context, cfg.dim));
    spread_pool_grad(&mut dx, &dpooled, cache.pooling);

    for (l, block) in params.text.blocks.iter().enumerate().rev() {
        dx = block_backward(&dx, block, &mut grads.text.blocks[l], &cache.blocks[l], cfg.heads);
    }

    grads.text.pos_embed += &dx;
    let ids = cache.padded_ids.as_ref().expect("text cache has ids");
    for (p, &id) in ids.iter().enumerate() {
        let mut row = grads.text.token_embed.row_mut(id as usize);
        row += &dx.row(p);
    }
}
