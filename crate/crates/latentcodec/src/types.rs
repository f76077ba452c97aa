//! Core latent types and codec configuration.

use crate::{CodecError, Result};
use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};

/// A sequence of continuous latent frames (row-major `t x dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSeq {
    pub frames: Vec<f32>,
    pub t: usize,
    pub dim: usize,
    /// Frame rate in Hz (25 for the VAE latent stream).
    pub rate_hz: f64,
}

impl LatentSeq {
    pub fn zeros(t: usize, dim: usize, rate_hz: f64) -> Self {
        Self { frames: vec![0.0; t * dim], t, dim, rate_hz }
    }

    pub fn length_s(&self) -> f64 {
        self.t as f64 / self.rate_hz
    }

    pub fn get(&self, frame: usize, ch: usize) -> f32 {
        self.frames[frame * self.dim + ch]
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.frames[frame * self.dim..(frame + 1) * self.dim]
    }

    /// `(t, dim)` tensor on the given device.
    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_vec(self.frames.clone(), (self.t, self.dim), device)?)
    }

    /// From a `(t, dim)` tensor.
    pub fn from_tensor(tensor: &Tensor, rate_hz: f64) -> Result<Self> {
        let (t, dim) = tensor.dims2()?;
        let frames = tensor.flatten_all()?.to_vec1::<f32>()?;
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::NonFinite("latent frames".into()));
        }
        Ok(Self { frames, t, dim, rate_hz })
    }

    pub fn all_finite(&self) -> bool {
        self.frames.iter().all(|v| v.is_finite())
    }

    /// Max absolute value over all frames.
    pub fn max_abs(&self) -> f32 {
        self.frames.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// Configuration of the codec stack (encoder/decoder, losses, FSQ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub sample_rate: u32,
    pub latent_dim: usize,
    pub latent_rate: u32,
    /// Per-stage encoder strides; their product must equal
    /// `sample_rate / latent_rate`.
    pub strides: Vec<usize>,
    /// Channel widths per encoder stage (input is stereo).
    pub channels: Vec<usize>,
    /// KL weight during warmup (0 in the final phase).
    pub kl_weight: f64,
    /// Adversarial weight schedule: warmup -> final.
    pub adv_weight_warmup: f64,
    pub adv_weight_final: f64,
    /// Pad non-divisible inputs by zero-extension instead of failing.
    pub pad_input: bool,
    /// FSQ per-dimension level counts.
    pub fsq_levels: Vec<u32>,
    /// Temporal pooling factor from latent rate to code rate (25 -> 5 Hz).
    pub fsq_pool: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            sample_rate: 4800,
            latent_dim: 64,
            latent_rate: 25,
            strides: vec![4, 4, 4, 3],
            channels: vec![32, 48, 64, 96],
            kl_weight: 1e-4,
            adv_weight_warmup: 0.1,
            adv_weight_final: 0.5,
            pad_input: true,
            fsq_levels: vec![8, 8, 8, 5, 5, 5],
            fsq_pool: 5,
        }
    }
}

impl CodecConfig {
    /// Samples per latent frame.
    pub fn samples_per_frame(&self) -> usize {
        (self.sample_rate / self.latent_rate) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let product: usize = self.strides.iter().product();
        if product != self.samples_per_frame() {
            return Err(CodecError::Invariant(format!(
                "stride product {product} != samples per frame {}",
                self.samples_per_frame()
            )));
        }
        if self.channels.len() != self.strides.len() {
            return Err(CodecError::Invariant("channels/strides length mismatch".into()));
        }
        if self.kl_weight < 0.0 || self.adv_weight_warmup < 0.0 || self.adv_weight_final < 0.0 {
            return Err(CodecError::Invariant("negative loss weight".into()));
        }
        let codebook: u64 = self.fsq_levels.iter().map(|&l| u64::from(l)).product();
        if codebook == 0 {
            return Err(CodecError::Invariant("empty FSQ levels".into()));
        }
        Ok(())
    }

    /// Implicit FSQ codebook size (product of level counts).
    pub fn codebook_size(&self) -> u64 {
        self.fsq_levels.iter().map(|&l| u64::from(l)).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_valid_and_64k() {
        let cfg = CodecConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.codebook_size(), 64000);
        assert_eq!(cfg.samples_per_frame(), 192);
    }

    #[test]
    fn full_rate_config_is_1920x() {
        let cfg = CodecConfig {
            sample_rate: 48000,
            strides: vec![8, 8, 6, 5],
            ..Default::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.samples_per_frame(), 1920);
    }

    #[test]
    fn bad_strides_rejected() {
        let cfg = CodecConfig { strides: vec![4, 4, 4, 4], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
