//! The unit of training data: an RGBA image paired with a caption.

use ndarray::Array2;

use crate::image::RgbaImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Grounding,
    Classification,
    WholeImage,
}

impl SampleSource {
    pub fn tag(self) -> u8 {
        match self {
            SampleSource::Grounding => 0,
            SampleSource::Classification => 1,
            SampleSource::WholeImage => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(SampleSource::Grounding),
            1 => Ok(SampleSource::Classification),
            2 => Ok(SampleSource::WholeImage),
            _ => Err(Error::Corrupt(format!("unknown sample source tag {tag}"))),
        }
    }
}

/// An RGB image, a focus map, and a caption in both text and token form.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaSample {
    pub image: RgbaImage,
    pub text: String,
    pub tokens: Vec<u32>,
    pub source: SampleSource,
    pub region_id: Option<u32>,
}

impl RgbaSample {
    /// Build and enforce the source-tag alpha invariant: whole-image
    /// samples carry alpha identically one; region samples carry at least
    /// one foreground and one background pixel.
    pub fn new(
        image: RgbaImage,
        text: String,
        tokens: Vec<u32>,
        source: SampleSource,
        region_id: Option<u32>,
    ) -> Result<Self> {
        match source {
            SampleSource::WholeImage => {
                if image.alpha.iter().any(|&v| v != 1.0) {
                    return Err(Error::Input("whole-image sample must have alpha all ones".into()));
                }
            }
            SampleSource::Grounding | SampleSource::Classification => {
                let has_fg = image.alpha.iter().any(|&v| v == 1.0);
                let has_bg = image.alpha.iter().any(|&v| v == 0.0);
                if !has_fg || !has_bg {
                    return Err(Error::Input(
                        "region sample must mix foreground and background alpha".into(),
                    ));
                }
            }
        }
        if tokens.is_empty() {
            return Err(Error::Input("sample has no caption tokens".into()));
        }
        Ok(Self { image, text, tokens, source, region_id })
    }
}

/// A half-open pixel box `[x0, x1) x [y0, y1)` with a region expression.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxAnnotation {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub text: String,
}

impl BoxAnnotation {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize, text: impl Into<String>) -> Self {
        Self { x0, y0, x1, y1, text: text.into() }
    }

    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::Input(format!(
                "degenerate box ({}, {}, {}, {})",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        if self.x1 > w || self.y1 > h {
            return Err(Error::Input(format!(
                "box ({}, {}, {}, {}) outside {w}x{h} image",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    /// Tight bounding box of a binary mask, if it has any foreground.
    pub fn of_mask(mask: &Array2<f64>, text: impl Into<String>) -> Option<Self> {
        let (h, w) = mask.dim();
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0usize, 0usize);
        for ((y, x), &v) in mask.indexed_iter() {
            if v == 1.0 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
        if x0 >= x1 {
            return None;
        }
        Some(Self { x0, y0, x1, y1, text: text.into() })
    }
}
