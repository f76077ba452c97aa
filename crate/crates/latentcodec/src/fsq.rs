//! Finite scalar quantization over attention-pooled latents.
//!
//! 25 Hz latents are pooled in groups of 5 (one learned query), projected
//! to one scalar per FSQ dimension, squashed to [-1, 1], and snapped to a
//! per-dimension uniform grid with a straight-through gradient. The digit
//! vector packs into a mixed-radix index below 64000; dequantization maps
//! grid values back to 64 dims and repeats frames 5x to rebuild a 25 Hz
//! Source Latent.

use crate::types::{CodecConfig, LatentSeq};
use crate::{CodecError, Result};
use candle_core::{Module, Tensor};
use nnkit::{Builder, Params, TensorRng};
use serde::{Deserialize, Serialize};

/// Discrete structural codes at the pooled (5 Hz) rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsqCodes {
    pub codes: Vec<u32>,
    pub levels: Vec<u32>,
    pub rate_hz: f64,
}

impl FsqCodes {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Mixed-radix packing: little-endian digits, `digit[0]` is the fastest.
pub fn pack_digits(digits: &[u32], levels: &[u32]) -> u32 {
    debug_assert_eq!(digits.len(), levels.len());
    let mut index = 0u32;
    let mut mult = 1u32;
    for (&d, &l) in digits.iter().zip(levels) {
        debug_assert!(d < l);
        index += d * mult;
        mult *= l;
    }
    index
}

pub fn unpack_index(index: u32, levels: &[u32]) -> Vec<u32> {
    let mut rest = index;
    levels
        .iter()
        .map(|&l| {
            let d = rest % l;
            rest /= l;
            d
        })
        .collect()
}

/// Uniform grid point for a digit at a level count: spans [-1, 1].
pub fn grid_value(digit: u32, level: u32) -> f32 {
    if level <= 1 {
        return 0.0;
    }
    -1.0 + 2.0 * digit as f32 / (level - 1) as f32
}

/// Nearest grid digit for a squashed value in [-1, 1].
pub fn nearest_digit(value: f32, level: u32) -> u32 {
    if level <= 1 {
        return 0;
    }
    let scaled = (value + 1.0) * 0.5 * (level - 1) as f32;
    (scaled.round().max(0.0) as u32).min(level - 1)
}

pub struct FsqTokenizer {
    pub config: CodecConfig,
    /// One learned pooling query over key-projected frames.
    query: Tensor,
    key_proj: candle_nn::Linear,
    in_proj: candle_nn::Linear,
    out_proj: candle_nn::Linear,
    /// Force uniform pooling weights (diagnostics / ablation).
    pub uniform_pool: bool,
}

impl FsqTokenizer {
    pub fn build(config: &CodecConfig, params: &mut Params, rng: &mut TensorRng) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let k = 32usize;
        let n_dims = config.fsq_levels.len();
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("fsq");
        let query = b.var("query", &[k], 0.1)?;
        let key_proj = b.linear("key_proj", d, k)?;
        let in_proj = b.linear("in_proj", d, n_dims)?;
        let out_proj = b.linear("out_proj", n_dims, d)?;
        Ok(Self { config: config.clone(), query, key_proj, in_proj, out_proj, uniform_pool: false })
    }

    fn pool_groups(&self, latent: &Tensor) -> Result<Tensor> {
        // (B, T, D) -> groups (B, G, P, D) with the tail group padded by
        // repeating the last frame.
        let (b, t, d) = latent.dims3()?;
        let p = self.config.fsq_pool;
        let rem = t % p;
        let padded = if rem == 0 {
            latent.clone()
        } else {
            let last = latent.narrow(1, t - 1, 1)?;
            let fill = last.expand((b, p - rem, d))?;
            Tensor::cat(&[latent, &fill], 1)?
        };
        let g = padded.dim(1)? / p;
        Ok(padded.reshape((b, g, p, d))?)
    }

    /// Attention-pooled and projected frames: `(B, T, D)` -> `(B, G, n_dims)`.
    ///
    /// Per-frame features are projected first, then convexly combined, so
    /// uniform attention weights reduce exactly to the group mean.
    pub fn pool(&self, latent: &Tensor) -> Result<Tensor> {
        let groups = self.pool_groups(latent)?; // (B, G, P, D)
        let (b, g, p, _d) = groups.dims4()?;
        let feats = self.in_proj.forward(&groups)?; // (B, G, P, n)
        let weights = if self.uniform_pool {
            Tensor::full(1.0f32 / p as f32, (b, g, p, 1), latent.device())?
        } else {
            let keys = self.key_proj.forward(&groups)?; // (B, G, P, K)
            let scores = keys.broadcast_matmul(&self.query.reshape((1, 1, self.query.dim(0)?, 1))?)?;
            let scores = (scores / (self.query.dim(0)? as f64).sqrt())?;
            candle_nn::ops::softmax(&scores, 2)? // over the P axis
        };
        Ok(feats.broadcast_mul(&weights)?.sum(2)?) // (B, G, n)
    }

    /// Squash to `[-1, 1]` then snap to the per-dimension grid with a
    /// straight-through gradient. Returns (quantized values, digits).
    pub fn quantize_values(&self, pooled: &Tensor) -> Result<(Tensor, Vec<Vec<u32>>)> {
        let squashed = pooled.tanh()?;
        self.snap_values(&squashed)
    }

    /// Snap values already in `[-1, 1]` (no squashing). Grid points are
    /// fixed points of this map, which makes quantize-dequantize-quantize
    /// the identity on codes.
    pub fn snap_values(&self, squashed: &Tensor) -> Result<(Tensor, Vec<Vec<u32>>)> {
        let squashed = squashed.clone();
        let snapped = self.snap(&squashed)?;
        // Straight-through: forward = snapped, backward = identity.
        let ste = ((&snapped - &squashed)?.detach() + &squashed)?;

        let dims = snapped.dims().to_vec();
        let (b, g, n) = match dims.len() {
            3 => snapped.dims3()?,
            2 => {
                let (g, n) = snapped.dims2()?;
                (1, g, n)
            }
            _ => return Err(CodecError::Invariant("snap expects 2- or 3-d values".into())),
        };
        let flat = snapped.reshape((b * g, n))?.to_vec2::<f32>()?;
        let mut digits = Vec::with_capacity(b * g);
        for row in &flat {
            let d: Vec<u32> = row
                .iter()
                .zip(&self.config.fsq_levels)
                .map(|(&v, &l)| nearest_digit(v, l))
                .collect();
            digits.push(d);
        }
        Ok((ste, digits))
    }

    fn snap(&self, squashed: &Tensor) -> Result<Tensor> {
        // Per-dimension: digit = round((v+1)/2*(L-1)), value = -1 + 2d/(L-1).
        let levels: Vec<f32> =
            self.config.fsq_levels.iter().map(|&l| (l - 1) as f32).collect();
        let n = self.config.fsq_levels.len();
        let shape: Vec<usize> = match squashed.dims().len() {
            3 => vec![1, 1, n],
            _ => vec![1, n],
        };
        let lm1 = Tensor::from_vec(levels, shape, squashed.device())?;
        let scaled = squashed.affine(0.5, 0.5)?.broadcast_mul(&lm1)?;
        let snapped = scaled.round()?.broadcast_div(&lm1)?.affine(2.0, -1.0)?;
        Ok(snapped)
    }

    /// Snap pre-squashed `(G, n)` values straight to codes.
    pub fn quantize_prescaled(&self, values: &Tensor) -> Result<FsqCodes> {
        let (_vals, digits) = self.snap_values(values)?;
        let codes: Vec<u32> =
            digits.iter().map(|d| pack_digits(d, &self.config.fsq_levels)).collect();
        Ok(FsqCodes {
            codes,
            levels: self.config.fsq_levels.clone(),
            rate_hz: f64::from(self.config.latent_rate) / self.config.fsq_pool as f64,
        })
    }

    /// Full tokenization of a latent sequence to discrete codes.
    pub fn quantize(&self, latent: &LatentSeq) -> Result<FsqCodes> {
        let device = self.query.device();
        let t = latent.to_tensor(device)?.unsqueeze(0)?;
        let pooled = self.pool(&t)?;
        let (_vals, digits) = self.quantize_values(&pooled)?;
        let codebook = self.config.codebook_size();
        let codes: Vec<u32> = digits
            .iter()
            .map(|d| pack_digits(d, &self.config.fsq_levels))
            .collect();
        if codes.iter().any(|&c| u64::from(c) >= codebook) {
            return Err(CodecError::Invariant(format!("code index >= {codebook}")));
        }
        Ok(FsqCodes {
            codes,
            levels: self.config.fsq_levels.clone(),
            rate_hz: f64::from(self.config.latent_rate) / self.config.fsq_pool as f64,
        })
    }

    /// Grid values for codes: `(G, n_dims)` tensor.
    pub fn codes_to_values(&self, codes: &FsqCodes) -> Result<Tensor> {
        let n = self.config.fsq_levels.len();
        let mut vals = Vec::with_capacity(codes.len() * n);
        for &c in &codes.codes {
            let digits = unpack_index(c, &self.config.fsq_levels);
            for (d, &l) in digits.iter().zip(&self.config.fsq_levels) {
                vals.push(grid_value(*d, l));
            }
        }
        Ok(Tensor::from_vec(vals, (codes.len(), n), self.query.device())?)
    }

    /// Dequantize codes to a 25 Hz Source Latent: project each grid vector
    /// to 64 dims and repeat frames `fsq_pool` times.
    pub fn dequantize(&self, codes: &FsqCodes) -> Result<LatentSeq> {
        let vals = self.codes_to_values(codes)?; // (G, n)
        let proj = self.out_proj.forward(&vals)?; // (G, D)
        let (g, d) = proj.dims2()?;
        let p = self.config.fsq_pool;
        let up = proj.unsqueeze(1)?.expand((g, p, d))?.reshape((g * p, d))?;
        LatentSeq::from_tensor(&up, f64::from(self.config.latent_rate))
    }

    /// Differentiable dequantization of pooled+quantized values (training).
    pub fn dequantize_values(&self, quantized: &Tensor) -> Result<Tensor> {
        let (b, g, _n) = quantized.dims3()?;
        let proj = self.out_proj.forward(quantized)?; // (B, G, D)
        let d = proj.dim(2)?;
        let p = self.config.fsq_pool;
        Ok(proj
            .unsqueeze(2)?
            .expand((b, g, p, d))?
            .reshape((b, g * p, d))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn tokenizer() -> (FsqTokenizer, Params) {
        let dev = Device::Cpu;
        let mut params = Params::new();
        let mut rng = TensorRng::new(7, &dev);
        let t = FsqTokenizer::build(&CodecConfig::default(), &mut params, &mut rng).unwrap();
        (t, params)
    }

    #[test]
    fn pack_zero_is_zero() {
        assert_eq!(pack_digits(&[0, 0, 0, 0, 0, 0], &[8, 8, 8, 5, 5, 5]), 0);
    }

    #[test]
    fn pack_unpack_roundtrip_samples() {
        let levels = [8u32, 8, 8, 5, 5, 5];
        for index in [0u32, 1, 63999, 12345, 4096] {
            let d = unpack_index(index, &levels);
            assert_eq!(pack_digits(&d, &levels), index);
        }
    }

    #[test]
    fn five_level_snap_example() {
        // Grid {-1, -0.5, 0, 0.5, 1}: squashed 0.3 snaps to 0.5.
        let digit = nearest_digit(0.3, 5);
        assert_eq!(grid_value(digit, 5), 0.5);
    }

    #[test]
    fn pool_shapes_and_padding() {
        let (t, _p) = tokenizer();
        let dev = Device::Cpu;
        let mut rng = TensorRng::new(1, &dev);
        let x = rng.randn(&[1, 400, 64], 1.0).unwrap();
        assert_eq!(t.pool(&x).unwrap().dims(), &[1, 80, 6]);
        let x = rng.randn(&[1, 401, 64], 1.0).unwrap();
        assert_eq!(t.pool(&x).unwrap().dims(), &[1, 81, 6]);
    }

    #[test]
    fn uniform_pool_equals_group_mean() {
        let (mut t, _p) = tokenizer();
        t.uniform_pool = true;
        let dev = Device::Cpu;
        let mut rng = TensorRng::new(2, &dev);
        let x = rng.randn(&[1, 10, 64], 1.0).unwrap();
        let pooled = t.pool(&x).unwrap();
        // Group mean computed directly on projected frames.
        let feats = t.in_proj.forward(&x.reshape((1, 2, 5, 64)).unwrap()).unwrap();
        let mean = feats.mean(2).unwrap();
        let diff = (pooled - mean).unwrap().abs().unwrap().max_all().unwrap();
        assert!(diff.to_scalar::<f32>().unwrap() < 1e-6);
    }

    #[test]
    fn quantize_idempotent_on_grid() {
        let (t, _p) = tokenizer();
        // Every grid point is a fixed point of the rounding.
        for &l in &[8u32, 5] {
            for d in 0..l {
                assert_eq!(nearest_digit(grid_value(d, l), l), d, "level {l} digit {d}");
            }
        }
        // quantize(dequantized grid values) returns the same codes.
        let dev = Device::Cpu;
        let mut rng = TensorRng::new(3, &dev);
        let latent = LatentSeq::from_tensor(&rng.randn(&[40, 64], 1.0).unwrap(), 25.0).unwrap();
        let codes1 = t.quantize(&latent).unwrap();
        let values = t.codes_to_values(&codes1).unwrap();
        let codes2 = t.quantize_prescaled(&values).unwrap();
        assert_eq!(codes1.codes, codes2.codes);
    }

    #[test]
    fn dequantize_repeats_frames() {
        let (t, _p) = tokenizer();
        let codes = FsqCodes { codes: vec![0, 63999], levels: vec![8, 8, 8, 5, 5, 5], rate_hz: 5.0 };
        let latent = t.dequantize(&codes).unwrap();
        assert_eq!(latent.t, 10);
        for f in 1..5 {
            assert_eq!(latent.row(0), latent.row(f));
        }
        for f in 6..10 {
            assert_eq!(latent.row(5), latent.row(f));
        }
    }
}
