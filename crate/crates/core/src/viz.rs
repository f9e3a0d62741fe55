//! Rendering attention maps and image composites to portable pixmaps.

use ndarray::{Array2, Array3};

use crate::model::{ArchConfig, AttentionMap};

/// Normalize a single head's grid to [0, 1] and upscale by `scale` with
/// nearest-neighbor replication, as grayscale RGB.
pub fn attention_grid_image(map: &AttentionMap, head: usize, cfg: &ArchConfig, scale: usize) -> Array3<f64> {
    let grid = map.head_grid(head, cfg);
    let max = grid.iter().cloned().fold(f64::MIN, f64::max);
    let min = grid.iter().cloned().fold(f64::MAX, f64::min);
    let range = (max - min).max(1e-12);
    let (gh, gw) = grid.dim();
    let mut out = Array3::zeros((gh * scale, gw * scale, 3));
    for y in 0..gh * scale {
        for x in 0..gw * scale {
            let v = (grid[[y / scale, x / scale]] - min) / range;
            for c in 0..3 {
                out[[y, x, c]] = v;
            }
        }
    }
    out
}

/// Stack images left to right with a one-pixel white separator. Inputs must
/// share a height.
pub fn side_by_side(images: &[Array3<f64>]) -> Array3<f64> {
    assert!(!images.is_empty());
    let h = images[0].dim().0;
    let total_w: usize =
        images.iter().map(|i| i.dim().1).sum::<usize>() + images.len().saturating_sub(1);
    let mut out = Array3::ones((h, total_w, 3));
    let mut x0 = 0usize;
    for img in images {
        let (ih, iw, _) = img.dim();
        assert_eq!(ih, h, "heights must match");
        for y in 0..h {
            for x in 0..iw {
                for c in 0..3 {
                    out[[y, x0 + x, c]] = img[[y, x, c]];
                }
            }
        }
        x0 += iw + 1;
    }
    out
}

/// Upscale an alpha map to a grayscale RGB image.
pub fn alpha_to_image(alpha: &Array2<f64>, scale: usize) -> Array3<f64> {
    let (h, w) = alpha.dim();
    let mut out = Array3::zeros((h * scale, w * scale, 3));
    for y in 0..h * scale {
        for x in 0..w * scale {
            let v = alpha[[y / scale, x / scale]];
            for c in 0..3 {
                out[[y, x, c]] = v;
            }
        }
    }
    out
}

/// Upscale an RGB image by pixel replication.
pub fn upscale(rgb: &Array3<f64>, scale: usize) -> Array3<f64> {
    let (h, w, _) = rgb.dim();
    let mut out = Array3::zeros((h * scale, w * scale, 3));
    for y in 0..h * scale {
        for x in 0..w * scale {
            for c in 0..3 {
                out[[y, x, c]] = rgb[[y / scale, x / scale, c]];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::from_ppm;

    #[test]
    fn side_by_side_concatenates_with_separator() {
        let a = Array3::zeros((4, 3, 3));
        let b = Array3::ones((4, 2, 3));
        let joined = side_by_side(&[a, b]);
        assert_eq!(joined.dim(), (4, 6, 3));
        assert_eq!(joined[[0, 3, 0]], 1.0); // separator column
        assert_eq!(joined[[0, 0, 0]], 0.0);
        assert_eq!(joined[[0, 4, 0]], 1.0);
    }

    #[test]
    fn rendered_pixmaps_parse_back() {
        let img = upscale(&Array3::from_elem((2, 2, 3), 0.5), 3);
        let ppm = crate::image::to_ppm(&img);
        let back = from_ppm(&ppm).unwrap();
        assert_eq!(back.dim(), (6, 6, 3));
    }
}
