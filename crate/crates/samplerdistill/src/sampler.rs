//! Euler integration of the learned velocity field with optional CFG.

use crate::schedule::Schedule;
use crate::{Result, SamplerError};
use candle_core::Tensor;
use ditcore::{compose_t, ConditionBundle, DiT};
use latentcodec::LatentSeq;
use nnkit::TensorRng;
use sha2::{Digest, Sha256};

pub struct SampleOutput {
    pub latent: LatentSeq,
    /// SHA-256 of the initial noise bytes, for exact replay verification.
    pub noise_hash: String,
    /// Number of model evaluations performed.
    pub model_evals: usize,
}

fn hash_tensor(t: &Tensor) -> Result<String> {
    let data = t.flatten_all()?.to_vec1::<f32>()?;
    let mut hasher = Sha256::new();
    for v in data {
        hasher.update(v.to_le_bytes());
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Integrates `x' = v(x, t)` from t=0 (noise) to t=1 with Euler steps on
/// the schedule grid.
///
/// `cfg_scale` semantics: 0 disables guidance (single conditional pass,
/// the distilled-student path); 1 is algebraically equal to the
/// conditional velocity and also runs a single pass; any other positive
/// value runs conditional + null passes and extrapolates.
#[allow(clippy::too_many_arguments)]
pub fn euler_sample(
    model: &DiT,
    cond: &ConditionBundle,
    null_cond: Option<&ConditionBundle>,
    schedule: &Schedule,
    cfg_scale: f64,
    source: &LatentSeq,
    mask: &[f32],
    seed: u64,
) -> Result<SampleOutput> {
    if cfg_scale < 0.0 {
        return Err(SamplerError::Domain(format!("cfg_scale={cfg_scale} must be >= 0")));
    }
    schedule.validate()?;
    let needs_null = cfg_scale != 0.0 && cfg_scale != 1.0;
    if needs_null && null_cond.is_none() {
        return Err(SamplerError::Domain("cfg_scale > 0 requires a null condition bundle".into()));
    }
    let device = model.device();
    let mut rng = TensorRng::new(seed, device);
    let t_len = source.t;
    let dim = source.dim;
    let noise = rng.randn(&[1, t_len, dim], 1.0)?;
    let noise_hash = hash_tensor(&noise)?;

    let source_t = source.to_tensor(device)?.unsqueeze(0)?;
    let mask_t = Tensor::from_vec(mask.to_vec(), (1, mask.len()), device)?;

    let mut x = noise;
    let mut model_evals = 0usize;
    for k in 0..schedule.steps {
        let t_k = schedule.times[k];
        let dt = schedule.times[k + 1] - t_k;
        let t_tensor = Tensor::from_vec(vec![t_k as f32], 1, device)?;
        let composed = compose_t(&source_t, &x, &mask_t)?;

        let velocity = if needs_null {
            let (v_cond, _) = model.forward(&composed, &t_tensor, &[cond], false)?;
            let (v_null, _) =
                model.forward(&composed, &t_tensor, &[null_cond.unwrap()], false)?;
            model_evals += 2;
            // v_null + cfg * (v_cond - v_null)
            ((&v_cond - &v_null)? * cfg_scale)?.add(&v_null)?
        } else {
            let (v, _) = model.forward(&composed, &t_tensor, &[cond], false)?;
            model_evals += 1;
            v
        };
        x = (x + (velocity * dt)?)?;
        let max = x.abs()?.max_all()?.to_scalar::<f32>()?;
        if !max.is_finite() {
            return Err(SamplerError::NonFiniteAtStep { step: k });
        }
    }

    let latent = LatentSeq::from_tensor(&x.squeeze(0)?, source.rate_hz)?;
    Ok(SampleOutput { latent, noise_hash, model_evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_schedule;
    use ditcore::{CaptionTokenizer, CondEncoders, CondInputs, DiTConfig};
    use nnkit::Params;

    fn toy_model() -> (DiT, CondEncoders, CaptionTokenizer) {
        let dev = candle_core::Device::Cpu;
        let cfg = DiTConfig {
            layers: 2,
            width: 64,
            heads: 4,
            kv_heads: 2,
            window: 4,
            text_layers: 1,
            ..Default::default()
        };
        let tok = CaptionTokenizer::new();
        let mut params = Params::new();
        let mut rng = TensorRng::new(0, &dev);
        let dit = DiT::build(&cfg, &mut params, &mut rng).unwrap();
        let enc = CondEncoders::build(&cfg, tok.vocab_size(), &mut params, &mut rng).unwrap();
        (dit, enc, tok)
    }

    #[test]
    fn sampler_is_deterministic_and_replayable() {
        let (dit, enc, tok) = toy_model();
        let cond = enc.embed(&CondInputs::new(tok.encode("a house track"), vec![1, 2])).unwrap();
        let schedule = make_schedule(4, 1.0).unwrap();
        let source = LatentSeq::zeros(20, 64, 25.0);
        let mask = vec![1.0f32; 20];
        let a = euler_sample(&dit, &cond, None, &schedule, 0.0, &source, &mask, 42).unwrap();
        let b = euler_sample(&dit, &cond, None, &schedule, 0.0, &source, &mask, 42).unwrap();
        assert_eq!(a.noise_hash, b.noise_hash);
        assert_eq!(a.latent.frames, b.latent.frames);
        assert_eq!(a.model_evals, 4);
        let c = euler_sample(&dit, &cond, None, &schedule, 0.0, &source, &mask, 43).unwrap();
        assert_ne!(a.noise_hash, c.noise_hash);
    }

    #[test]
    fn cfg_one_equals_conditional_exactly() {
        let (dit, enc, tok) = toy_model();
        let cond_in = CondInputs::new(tok.encode("a techno track at 140 bpm"), vec![3]);
        let cond = enc.embed(&cond_in).unwrap();
        let null = enc.embed(&cond_in.all_null()).unwrap();
        let schedule = make_schedule(3, 2.0).unwrap();
        let source = LatentSeq::zeros(16, 64, 25.0);
        let mask = vec![1.0f32; 16];
        let a = euler_sample(&dit, &cond, Some(&null), &schedule, 1.0, &source, &mask, 7).unwrap();
        let b = euler_sample(&dit, &cond, None, &schedule, 0.0, &source, &mask, 7).unwrap();
        assert_eq!(a.latent.frames, b.latent.frames);
        assert_eq!(a.model_evals, 3);
    }

    #[test]
    fn cfg_above_one_doubles_evals() {
        let (dit, enc, tok) = toy_model();
        let cond_in = CondInputs::new(tok.encode("a dnb track"), vec![5]);
        let cond = enc.embed(&cond_in).unwrap();
        let null = enc.embed(&cond_in.all_null()).unwrap();
        let schedule = make_schedule(5, 3.0).unwrap();
        let source = LatentSeq::zeros(16, 64, 25.0);
        let mask = vec![1.0f32; 16];
        let out =
            euler_sample(&dit, &cond, Some(&null), &schedule, 4.0, &source, &mask, 7).unwrap();
        assert_eq!(out.model_evals, 10);
    }
}
