//! Binary pixel masks and their reduction onto the patch-token grid.

use ndarray::Array2;

use crate::{Error, Result};

/// Feature-grid mask: `m[i, j] = 1` iff the corresponding `P x P` pixel
/// window of the source mask contains at least one foreground pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledMask {
    pub m: Array2<u8>,
}

impl PooledMask {
    pub fn grid_h(&self) -> usize {
        self.m.dim().0
    }

    pub fn grid_w(&self) -> usize {
        self.m.dim().1
    }

    pub fn all_ones(gh: usize, gw: usize) -> Self {
        Self { m: Array2::ones((gh, gw)) }
    }

    pub fn any_foreground(&self) -> bool {
        self.m.iter().any(|&v| v == 1)
    }

    /// Token index set in row-major patch order.
    pub fn foreground_tokens(&self) -> Vec<usize> {
        let (_, gw) = self.m.dim();
        self.m
            .indexed_iter()
            .filter(|(_, &v)| v == 1)
            .map(|((i, j), _)| i * gw + j)
            .collect()
    }
}

/// Max-pool a pixel-level binary mask onto the patch grid with
/// non-overlapping `P x P` windows.
pub fn pool_mask(mask: &Array2<f64>, patch: usize) -> Result<PooledMask> {
    let (h, w) = mask.dim();
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::Shape(format!(
            "mask dims ({h}, {w}) not divisible by patch size {patch}"
        )));
    }
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Input("pool_mask requires a binary mask".into()));
    }
    let (gh, gw) = (h / patch, w / patch);
    let mut m = Array2::zeros((gh, gw));
    for i in 0..gh {
        for j in 0..gw {
            let window = mask.slice(ndarray::s![
                i * patch..(i + 1) * patch,
                j * patch..(j + 1) * patch
            ]);
            m[[i, j]] = if window.iter().any(|&v| v == 1.0) { 1 } else { 0 };
        }
    }
    Ok(PooledMask { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent oracle: scan every pixel, mark its window.
    fn window_max_oracle(mask: &Array2<f64>, patch: usize) -> Array2<u8> {
        let (h, w) = mask.dim();
        let mut m = Array2::zeros((h / patch, w / patch));
        for y in 0..h {
            for x in 0..w {
                if mask[[y, x]] == 1.0 {
                    m[[y / patch, x / patch]] = 1;
                }
            }
        }
        m
    }

    #[test]
    fn all_zero_stays_zero() {
        let m = pool_mask(&Array2::zeros((8, 8)), 2).unwrap();
        assert!(m.m.iter().all(|&v| v == 0));
    }

    #[test]
    fn single_pixel_lights_exactly_its_window() {
        for y in 0..8 {
            for x in 0..8 {
                let mut mask = Array2::zeros((8, 8));
                mask[[y, x]] = 1.0;
                let m = pool_mask(&mask, 2).unwrap().m;
                for i in 0..4 {
                    for j in 0..4 {
                        let expect = u8::from(i == y / 2 && j == x / 2);
                        assert_eq!(m[[i, j]], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn random_masks_match_window_max_oracle() {
        let mut rng = crate::rng::SeedStreams::new(3).stream("test.pool");
        for _ in 0..100 {
            let mask = Array2::from_shape_fn((8, 8), |_| f64::from(rng.random_range(0..2)));
            let got = pool_mask(&mask, 2).unwrap().m;
            assert_eq!(got, window_max_oracle(&mask, 2));
        }
    }

    #[test]
    fn rejects_non_binary() {
        let mut mask = Array2::zeros((4, 4));
        mask[[1, 1]] = 0.5;
        assert!(pool_mask(&mask, 2).is_err());
    }

    #[test]
    fn rejects_indivisible_dims() {
        assert!(pool_mask(&Array2::zeros((5, 4)), 2).is_err());
    }
}
