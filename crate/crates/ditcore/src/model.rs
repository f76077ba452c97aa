//! The DiT backbone: patchify, adaLN-modulated hybrid-attention blocks with
//! per-layer cross-attention, and the unpatchified velocity head.

use crate::attn::{band_mask, CrossAttention, SelfAttention};
use crate::compose::{patchify, unpatchify};
use crate::cond::ConditionBundle;
use crate::config::DiTConfig;
use crate::{DitError, Result};
use candle_core::{Device, Module, Tensor, D};
use nnkit::{Builder, Params, TensorRng};

/// Per-layer cross-attention raw scores for one sample (frames x lyric
/// tokens, pre-softmax, head-averaged).
#[derive(Debug, Clone)]
pub struct AttnMaps {
    pub raw_scores: Vec<Vec<f32>>,
    pub frames: usize,
    pub tokens: usize,
}

impl AttnMaps {
    pub fn layer(&self, i: usize) -> &[f32] {
        &self.raw_scores[i]
    }

    pub fn n_layers(&self) -> usize {
        self.raw_scores.len()
    }

    /// Mean over layers: one frames x tokens score matrix.
    pub fn layer_mean(&self) -> Vec<f32> {
        let mut out = vec![0f32; self.frames * self.tokens];
        for layer in &self.raw_scores {
            for (o, v) in out.iter_mut().zip(layer) {
                *o += v;
            }
        }
        let n = self.raw_scores.len().max(1) as f32;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

struct Block {
    norm1: candle_nn::LayerNorm,
    self_attn: SelfAttention,
    cross: CrossAttention,
    norm2: candle_nn::LayerNorm,
    ff1: candle_nn::Linear,
    ff2: candle_nn::Linear,
    /// AdaLN table: (6, width) added to the shared timestep modulation.
    scale_shift: Tensor,
    sliding: bool,
}

pub struct DiT {
    pub config: DiTConfig,
    proj_in: candle_nn::Linear,
    t_mlp1: candle_nn::Linear,
    t_mlp2: candle_nn::Linear,
    t_block: candle_nn::Linear,
    blocks: Vec<Block>,
    final_norm: candle_nn::LayerNorm,
    final_mod: Tensor,
    proj_out: candle_nn::Linear,
    device: Device,
}

/// Sinusoidal embedding of timesteps in [0, 1]: `(B, dim)`.
fn timestep_embedding(t: &Tensor, dim: usize) -> Result<Tensor> {
    let device = t.device();
    let half = dim / 2;
    let freqs: Vec<f32> = (0..half)
        .map(|i| (1000f64.powf(i as f64 / half as f64)) as f32)
        .collect();
    let freqs = Tensor::from_vec(freqs, (1, half), device)?;
    let args = t.reshape(((), 1))?.broadcast_mul(&freqs)?;
    Ok(Tensor::cat(&[args.cos()?, args.sin()?], 1)?)
}

fn sin_positions(len: usize, dim: usize, device: &Device) -> Result<Tensor> {
    let mut data = vec![0f32; len * dim];
    for p in 0..len {
        for i in 0..dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let ang = p as f64 * freq;
            data[p * dim + 2 * i] = ang.sin() as f32;
            data[p * dim + 2 * i + 1] = ang.cos() as f32;
        }
    }
    Ok(Tensor::from_vec(data, (len, dim), device)?)
}

impl DiT {
    pub fn build(config: &DiTConfig, params: &mut Params, rng: &mut TensorRng) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let device = rng.device().clone();
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("dit");
        let proj_in = b.linear("proj_in", config.patch * config.in_channels, d)?;
        let t_mlp1 = b.linear("t_mlp1", 128, d)?;
        let t_mlp2 = b.linear("t_mlp2", d, d)?;
        let t_block = b.linear("t_block", d, 6 * d)?;
        let mut blocks = Vec::new();
        let kv_dim = d / config.heads * config.kv_heads;
        for i in 0..config.layers {
            let mut lb = b.sub(&format!("block{i}"));
            // Odd-indexed layers slide; even-indexed layers are global GQA.
            let sliding = i % 2 == 1;
            let (k_dim, kv_heads) = if sliding { (d, config.heads) } else { (kv_dim, config.kv_heads) };
            blocks.push(Block {
                norm1: lb.layer_norm("norm1", d)?,
                self_attn: SelfAttention {
                    q: lb.linear("sa_q", d, d)?,
                    k: lb.linear("sa_k", d, k_dim)?,
                    v: lb.linear("sa_v", d, k_dim)?,
                    out: lb.linear("sa_o", d, d)?,
                    heads: config.heads,
                    kv_heads,
                },
                cross: CrossAttention {
                    q: lb.linear("ca_q", d, d)?,
                    k: lb.linear("ca_k", d, d)?,
                    v: lb.linear("ca_v", d, d)?,
                    out: lb.linear("ca_o", d, d)?,
                    heads: config.heads,
                },
                norm2: lb.layer_norm("norm2", d)?,
                ff1: lb.linear("ff1", d, config.ff_mult * d)?,
                ff2: lb.linear("ff2", config.ff_mult * d, d)?,
                scale_shift: lb.var("scale_shift", &[6, d], 0.02)?,
                sliding,
            });
        }
        let final_norm = b.layer_norm("final_norm", d)?;
        let final_mod = b.var("final_mod", &[2, d], 0.02)?;
        let proj_out = b.linear("proj_out", d, config.patch * config.latent_dim)?;
        Ok(Self {
            config: config.clone(),
            proj_in,
            t_mlp1,
            t_mlp2,
            t_block,
            blocks,
            final_norm,
            final_mod,
            proj_out,
            device,
        })
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Stacks per-sample contexts into `(B, S_max, D)` plus an additive
    /// key mask for padding.
    fn stack_contexts(&self, bundles: &[&ConditionBundle]) -> Result<(Tensor, Tensor)> {
        let b = bundles.len();
        let s_max = bundles.iter().map(|c| c.context.dim(0).unwrap_or(0)).max().unwrap_or(1);
        let d = self.config.width;
        let mut rows = Vec::with_capacity(b);
        let mut mask = vec![0f32; b * s_max];
        for (i, c) in bundles.iter().enumerate() {
            let s = c.context.dim(0)?;
            let padded = if s < s_max {
                Tensor::cat(
                    &[&c.context, &Tensor::zeros((s_max - s, d), c.context.dtype(), &self.device)?],
                    0,
                )?
            } else {
                c.context.clone()
            };
            rows.push(padded.unsqueeze(0)?);
            for j in s..s_max {
                mask[i * s_max + j] = -1e9;
            }
        }
        let ctx = Tensor::cat(&rows.iter().collect::<Vec<_>>(), 0)?;
        let mask = Tensor::from_vec(mask, (b, s_max), &self.device)?;
        Ok((ctx, mask))
    }

    /// Full forward pass.
    ///
    /// `x`: composed input `(B, T, 129)`; `t`: `(B,)` in [0,1];
    /// `bundles`: one condition bundle per batch item.
    /// Returns the velocity `(B, T, 64)` and, when `capture_maps`, the
    /// per-sample cross-attention maps over lyric columns.
    pub fn forward(
        &self,
        x: &Tensor,
        t: &Tensor,
        bundles: &[&ConditionBundle],
        capture_maps: bool,
    ) -> Result<(Tensor, Vec<AttnMaps>)> {
        self.forward_inner(x, t, bundles, capture_maps, false)
    }

    /// Diagnostic forward that skips every global (even-indexed) layer.
    pub fn forward_sliding_only(
        &self,
        x: &Tensor,
        t: &Tensor,
        bundles: &[&ConditionBundle],
    ) -> Result<Tensor> {
        Ok(self.forward_inner(x, t, bundles, false, true)?.0)
    }

    fn forward_inner(
        &self,
        x: &Tensor,
        t: &Tensor,
        bundles: &[&ConditionBundle],
        capture_maps: bool,
        sliding_only: bool,
    ) -> Result<(Tensor, Vec<AttnMaps>)> {
        let (b, t_len, c_in) = x.dims3()?;
        if c_in != self.config.in_channels {
            return Err(DitError::Shape(format!(
                "expected {} input channels, got {c_in}",
                self.config.in_channels
            )));
        }
        if bundles.len() != b {
            return Err(DitError::Shape("one condition bundle per batch item required".into()));
        }
        let patch = self.config.patch;
        let h = patchify(x, patch)?;
        let f = t_len / patch;
        let d = self.config.width;

        let mut h = self.proj_in.forward(&h)?;
        h = h.broadcast_add(&sin_positions(f, d, &self.device)?)?;

        // Timestep conditioning (adaptive normalization).
        let temb = timestep_embedding(t, 128)?;
        let temb = self.t_mlp2.forward(&candle_nn::ops::silu(&self.t_mlp1.forward(&temb)?)?)?;
        let mod6 = self.t_block.forward(&candle_nn::ops::silu(&temb)?)?; // (B, 6D)
        let mod6 = mod6.reshape((b, 6, d))?;

        let (ctx, ctx_mask) = self.stack_contexts(bundles)?;
        let band = band_mask(f, self.config.window, &self.device)?;

        let mut maps: Vec<Vec<Vec<f32>>> = vec![Vec::new(); b];
        for block in &self.blocks {
            if sliding_only && !block.sliding {
                continue;
            }
            let modulation = mod6.broadcast_add(&block.scale_shift.reshape((1, 6, d))?)?;
            let chunk = |i: usize| modulation.narrow(1, i, 1);
            let (shift_sa, scale_sa, gate_sa) = (chunk(0)?, chunk(1)?, chunk(2)?);
            let (shift_ff, scale_ff, gate_ff) = (chunk(3)?, chunk(4)?, chunk(5)?);

            let normed = block.norm1.forward(&h)?;
            let modded =
                normed.broadcast_mul(&(scale_sa + 1.0)?)?.broadcast_add(&shift_sa)?;
            let mask = if block.sliding { Some(&band) } else { None };
            let sa = block.self_attn.forward(&modded, mask)?;
            h = (h + sa.broadcast_mul(&gate_sa)?)?;

            let cross = block.cross.forward(&h, &ctx, Some(&ctx_mask), capture_maps)?;
            h = (h + cross.hidden)?;
            if capture_maps {
                if let Some(raw) = cross.raw_scores {
                    for (i, bundle) in bundles.iter().enumerate() {
                        let (lo, hi) = bundle.lyric_range;
                        let slice = raw.get(i)?.narrow(1, lo, hi - lo)?;
                        maps[i].push(slice.flatten_all()?.to_vec1::<f32>()?);
                    }
                }
            }

            let normed = block.norm2.forward(&h)?;
            let modded =
                normed.broadcast_mul(&(scale_ff + 1.0)?)?.broadcast_add(&shift_ff)?;
            let ff = block.ff2.forward(&candle_nn::ops::silu(&block.ff1.forward(&modded)?)?)?;
            h = (h + ff.broadcast_mul(&gate_ff)?)?;
        }

        // Final adaLN + projection.
        let final_mod = self
            .final_mod
            .reshape((1, 2, d))?
            .broadcast_add(&temb.reshape((b, 1, d))?.broadcast_as((b, 2, d))?)?;
        let shift = final_mod.narrow(1, 0, 1)?;
        let scale = final_mod.narrow(1, 1, 1)?;
        let out = self.final_norm.forward(&h)?;
        let out = out.broadcast_mul(&(scale + 1.0)?)?.broadcast_add(&shift)?;
        let out = self.proj_out.forward(&out)?;
        let velocity = unpatchify(&out, patch)?;
        debug_assert_eq!(velocity.dims3()?, (b, t_len, self.config.latent_dim));

        let maps = bundles
            .iter()
            .enumerate()
            .map(|(i, bundle)| AttnMaps {
                raw_scores: std::mem::take(&mut maps[i]),
                frames: f,
                tokens: bundle.lyric_len(),
            })
            .collect();
        Ok((velocity, maps))
    }
}
