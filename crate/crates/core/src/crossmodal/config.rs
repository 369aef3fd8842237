use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub mlm: f64,
    pub mpfr: f64,
    pub cmr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            mlm: 1.0,
            mpfr: 1.0,
            cmr: 1.0,
        }
    }
}

/// Architecture and pretraining objective settings. Optimizer settings live
/// in [`super::TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Includes the special tokens.
    pub vocab_size: usize,
    /// Text tokens after the leading CLS.
    pub max_text_len: usize,
    pub patch_size: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub channels: usize,
    pub mask_prob: f64,
    pub loss_weights: LossWeights,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            vocab_size: 4096,
            max_text_len: 32,
            patch_size: 8,
            image_h: 64,
            image_w: 64,
            channels: 1,
            mask_prob: 0.15,
            loss_weights: LossWeights::default(),
            seed: 17,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.patch_size == 0
            || self.image_h == 0
            || self.image_w == 0
            || !self.image_h.is_multiple_of(self.patch_size)
            || !self.image_w.is_multiple_of(self.patch_size)
        {
            return bad(format!(
                "image {}x{} not divisible into {}px patches",
                self.image_h, self.image_w, self.patch_size
            ));
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if !(self.mask_prob > 0.0 && self.mask_prob < 1.0) {
            return bad(format!("mask_prob {} not in (0, 1)", self.mask_prob));
        }
        let w = self.loss_weights;
        if !(w.mlm >= 0.0 && w.mpfr >= 0.0 && w.cmr >= 0.0) {
            return bad(format!("negative loss weight {w:?}"));
        }
        if self.vocab_size < super::vocab::SPECIAL_TOKENS.len() {
            return bad(format!("vocab_size {} too small", self.vocab_size));
        }
        if self.max_text_len == 0 {
            return bad("max_text_len must be positive".into());
        }
        Ok(())
    }

    /// `N = H * W / P^2`
    pub fn num_patches(&self) -> usize {
        (self.image_h / self.patch_size) * (self.image_w / self.patch_size)
    }

    /// `P^2 * C`
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }
}
