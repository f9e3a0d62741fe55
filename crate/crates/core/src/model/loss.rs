//! Symmetric contrastive loss over a batch of paired embeddings.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

use super::forward::Embedding;

/// Loss value plus gradients with respect to the (unit-normalized) image
/// and text embeddings.
#[derive(Debug, Clone)]
pub struct ContrastiveLoss {
    pub loss: f64,
    pub d_img: Vec<Array1<f64>>,
    pub d_txt: Vec<Array1<f64>>,
}

fn check_inputs(img: &[Embedding], txt: &[Embedding]) -> Result<usize> {
    if img.is_empty() {
        return Err(Error::Input("contrastive loss needs at least one pair".into()));
    }
    if img.len() != txt.len() {
        return Err(Error::Input(format!(
            "batch sizes differ: {} images vs {} texts",
            img.len(),
            txt.len()
        )));
    }
    for e in img.iter().chain(txt.iter()) {
        if (e.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Input("embeddings must be unit-norm".into()));
        }
    }
    Ok(img.len())
}

fn logits(img: &[Embedding], txt: &[Embedding], tau: f64, n: usize) -> Array2<f64> {
    let mut z = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            z[[i, j]] = img[i].dot(&txt[j]) / tau;
        }
    }
    z
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Cross-entropy over the n x n similarity matrix scaled by 1/tau, averaged
/// over the image-to-text and text-to-image directions.
pub fn contrastive_loss_value(img: &[Embedding], txt: &[Embedding], tau: f64) -> Result<f64> {
    let n = check_inputs(img, txt)?;
    let z = logits(img, txt, tau, n);
    let mut loss = 0.0;
    for i in 0..n {
        let lse = log_sum_exp(z.row(i).iter().cloned());
        loss += lse - z[[i, i]];
    }
    for j in 0..n {
        let lse = log_sum_exp(z.column(j).iter().cloned());
        loss += lse - z[[j, j]];
    }
    Ok(0.5 * loss / n as f64)
}

/// Loss plus gradients w.r.t. each embedding.
pub fn contrastive_loss(img: &[Embedding], txt: &[Embedding], tau: f64) -> Result<ContrastiveLoss> {
    let n = check_inputs(img, txt)?;
    let z = logits(img, txt, tau, n);

    let mut d_z: Array2<f64> = Array2::zeros((n, n));
    let mut loss = 0.0;
    let w = 0.5 / n as f64;
    for i in 0..n {
        let lse = log_sum_exp(z.row(i).iter().cloned());
        loss += lse - z[[i, i]];
        for j in 0..n {
            let p = (z[[i, j]] - lse).exp();
            d_z[[i, j]] += w * (p - f64::from(u8::from(i == j)));
        }
    }
    for j in 0..n {
        let lse = log_sum_exp(z.column(j).iter().cloned());
        loss += lse - z[[j, j]];
        for i in 0..n {
            let p = (z[[i, j]] - lse).exp();
            d_z[[i, j]] += w * (p - f64::from(u8::from(i == j)));
        }
    }
    let loss = 0.5 * loss / n as f64;

    let e = img[0].values.len();
    let mut d_img = vec![Array1::zeros(e); n];
    let mut d_txt = vec![Array1::zeros(e); n];
    for i in 0..n {
        for j in 0..n {
            let g = d_z[[i, j]] / tau;
            if g != 0.0 {
                d_img[i].scaled_add(g, &txt[j].values);
                d_txt[j].scaled_add(g, &img[i].values);
            }
        }
    }
    Ok(ContrastiveLoss { loss, d_img, d_txt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn emb(v: Vec<f64>) -> Embedding {
        let a = Array1::from(v);
        let n = a.dot(&a).sqrt();
        Embedding { values: a.mapv(|x| x / n) }
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let i = vec![emb(vec![1.0, 0.0])];
        let t = vec![emb(vec![0.0, 1.0])];
        let out = contrastive_loss(&i, &t, 0.07).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.d_img[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_embeddings_give_ln_n() {
        for n in [2usize, 4, 7] {
            let e = emb(vec![0.3, -0.2, 0.9, 0.1]);
            let img = vec![e.clone(); n];
            let txt = vec![e.clone(); n];
            let loss = contrastive_loss_value(&img, &txt, 0.07).unwrap();
            assert!((loss - (n as f64).ln()).abs() < 1e-9, "n={n}: {loss}");
        }
    }

    #[test]
    fn empty_batch_is_an_input_error() {
        assert!(contrastive_loss(&[], &[], 1.0).is_err());
    }

    /// Direct softmax enumeration oracle for an n=2 batch with orthogonal
    /// matched pairs at tau = 1: diag logits 0, off-diagonal 1.
    #[test]
    fn two_pair_orthogonal_matches_enumeration_oracle() {
        let img = vec![emb(vec![1.0, 0.0, 0.0, 0.0]), emb(vec![0.0, 1.0, 0.0, 0.0])];
        let txt = vec![emb(vec![0.0, 1.0, 0.0, 0.0]), emb(vec![1.0, 0.0, 0.0, 0.0])];
        // Exhaustive oracle: compute each direction's cross-entropy from the
        // raw similarity table with plain exp/ln arithmetic.
        let sims = array![[0.0, 1.0], [1.0, 0.0]];
        let mut oracle = 0.0;
        for i in 0..2 {
            let denom: f64 = (0..2).map(|j| f64::exp(sims[[i, j]])).sum();
            oracle += -(f64::exp(sims[[i, i]]) / denom).ln();
        }
        for j in 0..2 {
            let denom: f64 = (0..2).map(|i| f64::exp(sims[[i, j]])).sum();
            oracle += -(f64::exp(sims[[j, j]]) / denom).ln();
        }
        let oracle = 0.5 * oracle / 2.0;

        let got = contrastive_loss(&img, &txt, 1.0).unwrap();
        assert!((got.loss - oracle).abs() < 1e-12);
    }

    /// Scaling tau leaves similarity rankings unchanged: argmax of each
    /// row of the logit matrix is tau-invariant.
    #[test]
    fn temperature_does_not_change_ranking() {
        let img = vec![emb(vec![0.9, 0.1, 0.3]), emb(vec![-0.2, 0.8, 0.1])];
        let txt = vec![emb(vec![0.8, 0.0, 0.4]), emb(vec![0.0, 1.0, 0.2])];
        let rank = |tau: f64| -> Vec<usize> {
            (0..2)
                .map(|i| {
                    (0..2)
                        .max_by(|&a, &b| {
                            let sa = img[i].dot(&txt[a]) / tau;
                            let sb = img[i].dot(&txt[b]) / tau;
                            sa.partial_cmp(&sb).unwrap()
                        })
                        .unwrap()
                })
                .collect()
        };
        assert_eq!(rank(0.07), rank(1.0));
        assert_eq!(rank(0.07), rank(13.7));
    }
}
