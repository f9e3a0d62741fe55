//! Architecture hyperparameters for the dual-tower encoder.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Patch size P of the first-layer convolutions.
    pub patch: usize,
    /// Input image height and width in pixels (square, divisible by `patch`).
    pub image_size: usize,
    /// Token width D of the image tower.
    pub dim: usize,
    /// Number of transformer blocks L in the image tower.
    pub layers: usize,
    /// Attention heads per block (divides `dim`).
    pub heads: usize,
    /// Joint embedding width E.
    pub embed: usize,
    /// Number of transformer blocks in the text tower.
    pub text_layers: usize,
    /// Text context length in tokens.
    pub context: usize,
    /// Vocabulary size of the text tower.
    pub vocab: usize,
    /// Contrastive temperature tau; logits are similarity / tau. Fixed,
    /// never updated by the optimizer.
    pub temperature: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            patch: 4,
            image_size: 32,
            dim: 64,
            layers: 4,
            heads: 4,
            embed: 64,
            text_layers: 2,
            context: 16,
            vocab: crate::data::Vocabulary::builtin().len(),
            temperature: 0.07,
        }
    }
}

impl ArchConfig {
    /// Patches per image side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch
    }

    /// Number of patch tokens N.
    pub fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    /// Sequence length of the image tower (CLS + patches).
    pub fn seq_len(&self) -> usize {
        1 + self.num_patches()
    }

    /// Per-head width.
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Hidden width of the MLP (4x, as in standard ViT blocks).
    pub fn mlp_hidden(&self) -> usize {
        4 * self.dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.image_size == 0 || self.image_size % self.patch != 0 {
            return Err(Error::Config(format!(
                "image_size {} must be a positive multiple of patch {}",
                self.image_size, self.patch
            )));
        }
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.layers == 0 || self.text_layers == 0 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        if self.embed == 0 || self.context == 0 || self.vocab == 0 {
            return Err(Error::Config("embed, context and vocab must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// A tiny configuration used by gradient verification and fast tests.
    pub fn tiny() -> Self {
        Self {
            patch: 4,
            image_size: 8,
            dim: 16,
            layers: 2,
            heads: 2,
            embed: 8,
            text_layers: 1,
            context: 8,
            vocab: crate::data::Vocabulary::builtin().len(),
            temperature: 0.07,
        }
    }
}
