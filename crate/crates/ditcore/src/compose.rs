//! Source/Noised/Mask channel composition and the patchify stage.

use crate::{DitError, Result};
use candle_core::{Device, Tensor};
use latentcodec::LatentSeq;

/// Channel concatenation `[source(64) | noised(64) | mask(1)]` for one item.
pub fn compose_input(
    source: &LatentSeq,
    noised: &LatentSeq,
    mask: &[f32],
    device: &Device,
) -> Result<Tensor> {
    if source.t != noised.t || source.t != mask.len() {
        return Err(DitError::Shape(format!(
            "length mismatch: source {} noised {} mask {}",
            source.t,
            noised.t,
            mask.len()
        )));
    }
    if mask.iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(DitError::Contract("mask values must be exactly 0 or 1".into()));
    }
    let src = source.to_tensor(device)?;
    let noi = noised.to_tensor(device)?;
    let m = Tensor::from_vec(mask.to_vec(), (mask.len(), 1), device)?;
    Ok(Tensor::cat(&[&src, &noi, &m], 1)?)
}

/// Batched composition: `(B,T,64) + (B,T,64) + (B,T)` -> `(B,T,129)`.
pub fn compose_t(source: &Tensor, noised: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let (b, t, _d) = source.dims3()?;
    if noised.dims3()? != source.dims3()? {
        return Err(DitError::Shape("source/noised shape mismatch".into()));
    }
    if mask.dims2()? != (b, t) {
        return Err(DitError::Shape("mask shape mismatch".into()));
    }
    let m = mask.unsqueeze(2)?;
    Ok(Tensor::cat(&[source, noised, &m], 2)?)
}

/// Concatenate adjacent frame pairs channel-wise: `(B,T,C)` -> `(B,T/2,2C)`.
pub fn patchify(x: &Tensor, patch: usize) -> Result<Tensor> {
    let (b, t, c) = x.dims3()?;
    if t % patch != 0 {
        return Err(DitError::Shape(format!("sequence length {t} not divisible by patch {patch}")));
    }
    Ok(x.reshape((b, t / patch, patch * c))?)
}

/// Inverse of [`patchify`]: `(B,T/2,2C)` -> `(B,T,C)`.
pub fn unpatchify(x: &Tensor, patch: usize) -> Result<Tensor> {
    let (b, g, pc) = x.dims3()?;
    if pc % patch != 0 {
        return Err(DitError::Shape(format!("channels {pc} not divisible by patch {patch}")));
    }
    Ok(x.reshape((b, g * patch, pc / patch))?)
}
