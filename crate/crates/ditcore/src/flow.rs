//! Flow-matching objective: straight-line perturbation (t=0 noise,
//! t=1 data), velocity target `data - noise`, mask-weighted MSE.

use crate::compose::compose_t;
use crate::cond::ConditionBundle;
use crate::model::DiT;
use crate::{DitError, Result};
use candle_core::Tensor;
use latentcodec::LatentSeq;

/// `x_t = (1 - t) * noise + t * data` for one item.
pub fn flow_perturb(data: &LatentSeq, noise: &LatentSeq, t: f64) -> Result<LatentSeq> {
    if !(0.0..=1.0).contains(&t) {
        return Err(DitError::Contract(format!("t={t} outside [0,1]")));
    }
    if data.t != noise.t || data.dim != noise.dim {
        return Err(DitError::Shape("data/noise shape mismatch".into()));
    }
    let frames = data
        .frames
        .iter()
        .zip(&noise.frames)
        .map(|(&d, &n)| ((1.0 - t) * f64::from(n) + t * f64::from(d)) as f32)
        .collect();
    Ok(LatentSeq { frames, t: data.t, dim: data.dim, rate_hz: data.rate_hz })
}

/// Batched perturbation with per-item times `t (B,)`:
/// `(B,T,D) x (B,T,D) -> (B,T,D)`.
pub fn flow_perturb_t(data: &Tensor, noise: &Tensor, t: &Tensor) -> Result<Tensor> {
    let (b, _t, _d) = data.dims3()?;
    let t3 = t.reshape((b, 1, 1))?;
    let one_minus = (t3.affine(-1.0, 1.0))?;
    Ok(noise.broadcast_mul(&one_minus)?.add(&data.broadcast_mul(&t3)?)?)
}

/// One flow-matching batch on tensors.
pub struct FlowBatch<'a> {
    /// Target latents `(B, T, 64)`.
    pub data: Tensor,
    /// Source latents `(B, T, 64)`.
    pub source: Tensor,
    /// Generation mask `(B, T)` in {0,1}: loss counts masked frames only.
    pub mask: Tensor,
    /// Fresh noise `(B, T, 64)`.
    pub noise: Tensor,
    /// Times `(B,)` in [0,1].
    pub t: Tensor,
    pub bundles: Vec<&'a ConditionBundle>,
}

/// Masked flow-matching loss. Frames with mask=0 contribute exactly zero.
pub fn fm_loss(model: &DiT, batch: &FlowBatch) -> Result<Tensor> {
    let x_t = flow_perturb_t(&batch.data, &batch.noise, &batch.t)?;
    let composed = compose_t(&batch.source, &x_t, &batch.mask)?;
    let (velocity, _) = model.forward(&composed, &batch.t, &batch.bundles, false)?;
    let target = (&batch.data - &batch.noise)?;
    let sq = (velocity - target)?.sqr()?; // (B,T,D)
    let mask3 = batch.mask.unsqueeze(2)?;
    let weighted = sq.broadcast_mul(&mask3)?;
    let d = batch.data.dim(2)? as f64;
    let denom = (batch.mask.sum_all()?.to_scalar::<f32>()? as f64 * d).max(1.0);
    Ok((weighted.sum_all()? / denom)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;
    use nnkit::TensorRng;

    #[test]
    fn endpoints() {
        let dev = Device::Cpu;
        let mut rng = TensorRng::new(0, &dev);
        let data = LatentSeq::from_tensor(&rng.randn(&[8, 64], 1.0).unwrap(), 25.0).unwrap();
        let noise = LatentSeq::from_tensor(&rng.randn(&[8, 64], 1.0).unwrap(), 25.0).unwrap();
        let x0 = flow_perturb(&data, &noise, 0.0).unwrap();
        assert_eq!(x0.frames, noise.frames);
        let x1 = flow_perturb(&data, &noise, 1.0).unwrap();
        assert_eq!(x1.frames, data.frames);
    }

    #[test]
    fn out_of_range_t_rejected() {
        let data = LatentSeq::zeros(4, 64, 25.0);
        let noise = LatentSeq::zeros(4, 64, 25.0);
        assert!(flow_perturb(&data, &noise, 1.5).is_err());
        assert!(flow_perturb(&data, &noise, -0.1).is_err());
    }

    #[test]
    fn data_equals_noise_gives_zero_target() {
        let dev = Device::Cpu;
        let mut rng = TensorRng::new(1, &dev);
        let x = rng.randn(&[2, 8, 64], 1.0).unwrap();
        let t = Tensor::from_vec(vec![0.3f32, 0.8], 2, &dev).unwrap();
        let xt = flow_perturb_t(&x, &x, &t).unwrap();
        let diff = (xt - &x).unwrap().abs().unwrap().max_all().unwrap();
        assert!(diff.to_scalar::<f32>().unwrap() < 1e-6);
    }
}
