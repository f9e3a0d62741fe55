//! Alpha-map construction and the image preprocessing variants of the
//! proposal-ranking ensemble.

use ndarray::{Array2, Array3};

use crate::data::BoxAnnotation;
use crate::image::{resize_bilinear2, resize_bilinear3, RgbaImage};
use crate::{Error, Result};

/// Reference width at which the blur sigma is quoted; desk-scale images
/// rescale sigma proportionally to their own width.
pub const SIGMA_REFERENCE_WIDTH: f64 = 224.0;

/// 1 inside the half-open box, 0 outside.
pub fn box_to_alpha(b: &BoxAnnotation, h: usize, w: usize) -> Result<Array2<f64>> {
    b.validate(h, w)?;
    let mut alpha = Array2::zeros((h, w));
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            alpha[[y, x]] = 1.0;
        }
    }
    Ok(alpha)
}

/// Which input variants the ensemble averages over.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSpec {
    pub original: bool,
    /// Background blur with this sigma (quoted at the reference width).
    pub blur_sigma: Option<f64>,
    /// Square crop of the proposal box, zero-filled, rescaled.
    pub crop: bool,
    pub grayscale: bool,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self { original: true, blur_sigma: Some(100.0), crop: false, grayscale: false }
    }
}

impl PreprocessSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.original && self.blur_sigma.is_none() && !self.crop && !self.grayscale {
            return Err(Error::Config("at least one preprocessing variant must be enabled".into()));
        }
        if let Some(s) = self.blur_sigma {
            if !(s > 0.0) {
                return Err(Error::Config(format!("blur sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn variant_count(&self) -> usize {
        usize::from(self.original)
            + usize::from(self.blur_sigma.is_some())
            + usize::from(self.crop)
            + usize::from(self.grayscale)
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        k.push((-0.5 * (d / sigma).powi(2)).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with clamp-to-edge padding.
pub fn gaussian_blur(rgb: &Array3<f64>, sigma: f64) -> Array3<f64> {
    let (h, w, c) = rgb.dim();
    let k = gaussian_kernel(sigma);
    let radius = k.len() / 2;
    let mut tmp = Array3::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, &kv) in k.iter().enumerate() {
                    let sx = (x + i).saturating_sub(radius).min(w - 1);
                    acc += kv * rgb[[y, sx, ch]];
                }
                tmp[[y, x, ch]] = acc;
            }
        }
    }
    let mut out = Array3::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, &kv) in k.iter().enumerate() {
                    let sy = (y + i).saturating_sub(radius).min(h - 1);
                    acc += kv * tmp[[sy, x, ch]];
                }
                out[[y, x, ch]] = acc;
            }
        }
    }
    out
}

/// Blur only the background: foreground pixels (alpha 1) keep their values,
/// background pixels take the blurred image, with a linear blend for
/// fractional alpha. Sigma is rescaled from the reference width to this
/// image's width.
pub fn background_blur(image: &RgbaImage, sigma_at_reference: f64) -> Result<RgbaImage> {
    let w = image.width() as f64;
    let sigma = sigma_at_reference * w / SIGMA_REFERENCE_WIDTH;
    let blurred = gaussian_blur(&image.rgb, sigma);
    let (h, wd, _) = image.rgb.dim();
    let mut out = Array3::zeros((h, wd, 3));
    for y in 0..h {
        for x in 0..wd {
            let a = image.alpha[[y, x]];
            for c in 0..3 {
                out[[y, x, c]] = a * image.rgb[[y, x, c]] + (1.0 - a) * blurred[[y, x, c]];
            }
        }
    }
    RgbaImage::new(out, image.alpha.clone())
}

/// Crop the box, pad to square with zeros (black, alpha 0), and rescale to
/// `out_size`; the alpha map is cropped and rescaled the same way and
/// re-binarized.
pub fn crop_square_zero_fill(
    image: &RgbaImage,
    b: &BoxAnnotation,
    out_size: usize,
) -> Result<RgbaImage> {
    let (h, w, _) = image.rgb.dim();
    b.validate(h, w)?;
    let (cw, ch) = (b.width(), b.height());
    let side = cw.max(ch);
    let ox = (side - cw) / 2;
    let oy = (side - ch) / 2;
    let mut sq_rgb = Array3::zeros((side, side, 3));
    let mut sq_alpha = Array2::zeros((side, side));
    for y in 0..ch {
        for x in 0..cw {
            for c in 0..3 {
                sq_rgb[[oy + y, ox + x, c]] = image.rgb[[b.y0 + y, b.x0 + x, c]];
            }
            sq_alpha[[oy + y, ox + x]] = image.alpha[[b.y0 + y, b.x0 + x]];
        }
    }
    let rgb = resize_bilinear3(&sq_rgb, out_size, out_size);
    let alpha = resize_bilinear2(&sq_alpha, out_size, out_size).mapv(|v| f64::from(u8::from(v > 0.5)));
    RgbaImage::new(rgb, alpha)
}

/// Standard luminance weights, replicated across channels; alpha preserved.
pub fn grayscale(image: &RgbaImage) -> RgbaImage {
    let (h, w, _) = image.rgb.dim();
    let mut out = Array3::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            let lum = 0.299 * image.rgb[[y, x, 0]]
                + 0.587 * image.rgb[[y, x, 1]]
                + 0.114 * image.rgb[[y, x, 2]];
            for c in 0..3 {
                out[[y, x, c]] = lum;
            }
        }
    }
    RgbaImage { rgb: out, alpha: image.alpha.clone() }
}
