//! RGB image with a per-pixel focus (alpha) map, plus portable-pixmap I/O.
//!
//! Channel values live in `[0, 1]`. `alpha = 1` marks foreground the encoder
//! should focus on, `alpha = 0` marks context.

use ndarray::{Array2, Array3};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RgbaImage {
    /// H x W x 3.
    pub rgb: Array3<f64>,
    /// H x W.
    pub alpha: Array2<f64>,
}

impl RgbaImage {
    /// Build and validate: alpha dimensions must equal the RGB spatial
    /// dimensions and every channel value must lie in `[0, 1]`.
    pub fn new(rgb: Array3<f64>, alpha: Array2<f64>) -> Result<Self> {
        let (h, w, c) = rgb.dim();
        if c != 3 {
            return Err(Error::Shape(format!("rgb must have 3 channels, got {c}")));
        }
        if alpha.dim() != (h, w) {
            return Err(Error::Shape(format!(
                "alpha dims {:?} do not match rgb dims ({h}, {w})",
                alpha.dim()
            )));
        }
        let img = Self { rgb, alpha };
        img.validate_range()?;
        Ok(img)
    }

    /// All-ones alpha over the given RGB data.
    pub fn with_full_alpha(rgb: Array3<f64>) -> Result<Self> {
        let (h, w, _) = rgb.dim();
        Self::new(rgb, Array2::ones((h, w)))
    }

    pub fn height(&self) -> usize {
        self.rgb.dim().0
    }

    pub fn width(&self) -> usize {
        self.rgb.dim().1
    }

    /// Same RGB content with alpha replaced (validated).
    pub fn with_alpha(&self, alpha: Array2<f64>) -> Result<Self> {
        Self::new(self.rgb.clone(), alpha)
    }

    fn validate_range(&self) -> Result<()> {
        if self.rgb.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("rgb values outside [0,1]".into()));
        }
        if self.alpha.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("alpha values outside [0,1]".into()));
        }
        Ok(())
    }
}

/// Bilinear resample of an H x W x C array to a new spatial size, with
/// pixel-center alignment and edge clamping. Values stay within the input's
/// convex hull, so unit-range images remain unit-range.
pub fn resize_bilinear3(src: &Array3<f64>, nh: usize, nw: usize) -> Array3<f64> {
    let (h, w, c) = src.dim();
    let mut out = Array3::zeros((nh, nw, c));
    for y in 0..nh {
        for x in 0..nw {
            let sy = ((y as f64 + 0.5) * h as f64 / nh as f64 - 0.5).clamp(0.0, (h - 1) as f64);
            let sx = ((x as f64 + 0.5) * w as f64 / nw as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            for ch in 0..c {
                let top = src[[y0, x0, ch]] * (1.0 - fx) + src[[y0, x1, ch]] * fx;
                let bot = src[[y1, x0, ch]] * (1.0 - fx) + src[[y1, x1, ch]] * fx;
                out[[y, x, ch]] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    out
}

/// Bilinear resample of a single-channel map.
pub fn resize_bilinear2(src: &Array2<f64>, nh: usize, nw: usize) -> Array2<f64> {
    let src3 = src.view().insert_axis(ndarray::Axis(2)).to_owned();
    let out3 = resize_bilinear3(&src3, nh, nw);
    out3.index_axis(ndarray::Axis(2), 0).to_owned()
}

/// Encode RGB channels as a binary PPM (P6, maxval 255).
pub fn to_ppm(rgb: &Array3<f64>) -> Vec<u8> {
    let (h, w, _) = rgb.dim();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push((rgb[[y, x, c]].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    out
}

/// Decode a binary PPM (P6, maxval 255) into unit-range RGB.
pub fn from_ppm(bytes: &[u8]) -> Result<Array3<f64>> {
    let corrupt = |m: &str| Error::Corrupt(format!("ppm: {m}"));
    // Header: magic, width, height, maxval, each separated by whitespace
    // (comments starting with '#' allowed), then a single whitespace byte.
    let mut pos = 0usize;
    let mut fields: Vec<String> = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(corrupt("not a P6 pixmap"));
    }
    let w: usize = fields[1].parse().map_err(|_| corrupt("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| corrupt("bad height"))?;
    if fields[3] != "255" {
        return Err(corrupt("only maxval 255 supported"));
    }
    pos += 1; // single whitespace after maxval
    let need = h * w * 3;
    if bytes.len() < pos + need {
        return Err(corrupt("truncated pixel data"));
    }
    let mut rgb = Array3::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                rgb[[y, x, c]] = f64::from(bytes[pos]) / 255.0;
                pos += 1;
            }
        }
    }
    Ok(rgb)
}
