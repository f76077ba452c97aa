//! DiT configuration.

use crate::{DitError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiTConfig {
    /// Transformer depth; must be even so sliding/global layers pair up.
    pub layers: usize,
    pub width: usize,
    pub heads: usize,
    /// Shared key/value head groups for the global-attention layers.
    pub kv_heads: usize,
    /// Sliding-window radius in post-patchify frames.
    pub window: usize,
    /// Temporal patch size (pairs of latent frames).
    pub patch: usize,
    /// Input channels after composition: source(64) + noised(64) + mask(1).
    pub in_channels: usize,
    /// Output latent channels.
    pub latent_dim: usize,
    /// Feed-forward expansion factor.
    pub ff_mult: usize,
    /// Caption text-encoder depth.
    pub text_layers: usize,
    /// Lyric vocabulary size (closed pseudo-syllable set).
    pub lyric_vocab: usize,
}

impl Default for DiTConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            width: 192,
            heads: 6,
            kv_heads: 2,
            window: 16,
            patch: 2,
            in_channels: 129,
            latent_dim: 64,
            ff_mult: 4,
            text_layers: 2,
            lyric_vocab: 64,
        }
    }
}

impl DiTConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers % 2 != 0 {
            return Err(DitError::Contract(format!("layers must be even, got {}", self.layers)));
        }
        if self.heads % self.kv_heads != 0 {
            return Err(DitError::Contract(format!(
                "heads {} not divisible by kv_heads {}",
                self.heads, self.kv_heads
            )));
        }
        if self.width % self.heads != 0 {
            return Err(DitError::Contract(format!(
                "width {} not divisible by heads {}",
                self.width, self.heads
            )));
        }
        if self.window < 1 {
            return Err(DitError::Contract("window must be >= 1".into()));
        }
        if self.in_channels != 2 * self.latent_dim + 1 {
            return Err(DitError::Contract(format!(
                "in_channels {} != 2*latent_dim+1 = {}",
                self.in_channels,
                2 * self.latent_dim + 1
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        DiTConfig::default().validate().unwrap();
    }

    #[test]
    fn odd_layers_rejected() {
        let cfg = DiTConfig { layers: 5, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gqa_grouping_arithmetic() {
        let cfg = DiTConfig { heads: 8, kv_heads: 2, width: 256, ..Default::default() };
        cfg.validate().unwrap();
        assert_eq!(cfg.heads / cfg.kv_heads, 4); // 4 query heads share each KV group
    }
}
