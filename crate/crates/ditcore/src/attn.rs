//! Attention primitives: sliding-window self-attention, global GQA
//! self-attention, and cross-attention with raw-score capture.

use crate::Result;
use candle_core::{Device, Tensor, D};
use candle_nn::Module;

pub fn split_heads(x: &Tensor, heads: usize) -> Result<Tensor> {
    let (b, s, d) = x.dims3()?;
    Ok(x.reshape((b, s, heads, d / heads))?.transpose(1, 2)?.contiguous()?)
}

pub fn merge_heads(x: &Tensor) -> Result<Tensor> {
    let (b, h, s, hd) = x.dims4()?;
    Ok(x.transpose(1, 2)?.reshape((b, s, h * hd))?)
}

/// Additive band mask: 0 inside `|i-j| <= window`, -1e9 outside.
pub fn band_mask(len: usize, window: usize, device: &Device) -> Result<Tensor> {
    let mut data = vec![0f32; len * len];
    for i in 0..len {
        for j in 0..len {
            if i.abs_diff(j) > window {
                data[i * len + j] = -1e9;
            }
        }
    }
    Ok(Tensor::from_vec(data, (len, len), device)?)
}

pub struct SelfAttention {
    pub q: candle_nn::Linear,
    pub k: candle_nn::Linear,
    pub v: candle_nn::Linear,
    pub out: candle_nn::Linear,
    pub heads: usize,
    pub kv_heads: usize,
}

impl SelfAttention {
    /// `mask`: optional additive `(S, S)` mask (sliding-window band).
    pub fn forward(&self, x: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
        let (b, s, _d) = x.dims3()?;
        let hd = self.q.weight().dim(0)? / self.heads;
        let q = split_heads(&self.q.forward(x)?, self.heads)?;
        let k = split_heads(&self.k.forward(x)?, self.kv_heads)?;
        let v = split_heads(&self.v.forward(x)?, self.kv_heads)?;
        // GQA: each kv head serves heads/kv_heads query heads.
        let group = self.heads / self.kv_heads;
        let expand_kv = |t: Tensor| -> candle_core::Result<Tensor> {
            if group == 1 {
                return Ok(t);
            }
            t.unsqueeze(2)?
                .expand((b, self.kv_heads, group, s, hd))?
                .reshape((b, self.heads, s, hd))
        };
        let k = expand_kv(k)?;
        let v = expand_kv(v)?;
        let mut scores = (q.matmul(&k.transpose(2, 3)?)? / (hd as f64).sqrt())?;
        if let Some(m) = mask {
            scores = scores.broadcast_add(&m.reshape((1, 1, s, s))?)?;
        }
        let att = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let o = merge_heads(&att.matmul(&v)?)?;
        Ok(self.out.forward(&o)?)
    }
}

pub struct CrossAttention {
    pub q: candle_nn::Linear,
    pub k: candle_nn::Linear,
    pub v: candle_nn::Linear,
    pub out: candle_nn::Linear,
    pub heads: usize,
}

pub struct CrossOutput {
    pub hidden: Tensor,
    /// Pre-softmax scores averaged over heads: `(B, F, S)`.
    pub raw_scores: Option<Tensor>,
}

impl CrossAttention {
    /// `context`: `(B, S, D)`; `ctx_mask`: additive `(B, S)` (0 valid, -1e9 pad).
    pub fn forward(
        &self,
        x: &Tensor,
        context: &Tensor,
        ctx_mask: Option<&Tensor>,
        capture: bool,
    ) -> Result<CrossOutput> {
        let (b, _f, _d) = x.dims3()?;
        let s = context.dim(1)?;
        let hd = self.q.weight().dim(0)? / self.heads;
        let q = split_heads(&self.q.forward(x)?, self.heads)?;
        let k = split_heads(&self.k.forward(context)?, self.heads)?;
        let v = split_heads(&self.v.forward(context)?, self.heads)?;
        let raw = (q.matmul(&k.transpose(2, 3)?)? / (hd as f64).sqrt())?; // (B,H,F,S)
        let raw_scores = if capture { Some(raw.mean(1)?) } else { None };
        let mut scores = raw;
        if let Some(m) = ctx_mask {
            scores = scores.broadcast_add(&m.reshape((b, 1, 1, s))?)?;
        }
        let att = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let o = merge_heads(&att.matmul(&v)?)?;
        Ok(CrossOutput { hidden: self.out.forward(&o)?, raw_scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nnkit::{Builder, Params, TensorRng};

    fn build_self(heads: usize, kv: usize, d: usize) -> (SelfAttention, Params) {
        let dev = Device::Cpu;
        let mut params = Params::new();
        let mut rng = TensorRng::new(0, &dev);
        let mut b = Builder::new(&mut params, &mut rng);
        let attn = SelfAttention {
            q: b.linear("q", d, d).unwrap(),
            k: b.linear("k", d, d / heads * kv).unwrap(),
            v: b.linear("v", d, d / heads * kv).unwrap(),
            out: b.linear("o", d, d).unwrap(),
            heads,
            kv_heads: kv,
        };
        (attn, params)
    }

    #[test]
    fn band_mask_zero_inside_window() {
        let dev = Device::Cpu;
        let m = band_mask(6, 2, &dev).unwrap().to_vec2::<f32>().unwrap();
        assert_eq!(m[0][2], 0.0);
        assert_eq!(m[0][3], -1e9);
        assert_eq!(m[5][3], 0.0);
    }

    #[test]
    fn gqa_shapes_work() {
        let dev = Device::Cpu;
        let (attn, _p) = build_self(4, 2, 32);
        let mut rng = TensorRng::new(1, &dev);
        let x = rng.randn(&[2, 10, 32], 1.0).unwrap();
        let y = attn.forward(&x, None).unwrap();
        assert_eq!(y.dims(), &[2, 10, 32]);
    }

    #[test]
    fn sliding_window_attention_is_exactly_zero_outside() {
        // Builds raw attention weights directly to check the mask effect.
        let dev = Device::Cpu;
        let m = band_mask(8, 2, &dev).unwrap();
        let mut rng = TensorRng::new(2, &dev);
        let scores = rng.randn(&[1, 1, 8, 8], 1.0).unwrap();
        let masked = scores.broadcast_add(&m.reshape((1, 1, 8, 8)).unwrap()).unwrap();
        let att = candle_nn::ops::softmax(&masked, D::Minus1).unwrap();
        let a = att.to_vec3::<f32>();
        // squeeze manually
        let att = att.reshape((8, 8)).unwrap().to_vec2::<f32>().unwrap();
        for i in 0..8usize {
            for j in 0..8usize {
                if i.abs_diff(j) > 2 {
                    assert_eq!(att[i][j], 0.0, "({i},{j})");
                }
            }
        }
        drop(a);
    }
}
