//! Adversarial dynamic-shift distillation.
//!
//! Three parameter sets on separate optimizers: the few-step student
//! (initialized from the teacher), an online fake-score network tracking
//! the student distribution, and a convolutional discriminator over latent
//! sequences. Per step: a shift is drawn from {1,2,3} and a step count
//! from {4..8}, the student produces a sample along the shifted schedule,
//! and the update combines the distribution-matching gradient (frozen
//! guided teacher vs fake score at a re-noised sample) with an LSGAN term.

use crate::schedule::make_schedule;
use crate::{Result, SamplerError};
use candle_core::{Module, Tensor};
use ditcore::{compose_t, ConditionBundle, DiT, DiTConfig};
use nnkit::{AdamW, Builder, Params, TensorRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistillConfig {
    pub shift_set: Vec<f64>,
    pub steps_min: usize,
    pub steps_max: usize,
    /// Distribution-matching weight.
    pub dm_weight: f64,
    /// Adversarial weight.
    pub gan_weight: f64,
    /// Guidance scale baked into the teacher's distribution-matching target.
    pub teacher_cfg: f64,
    pub lr: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            shift_set: vec![1.0, 2.0, 3.0],
            steps_min: 4,
            steps_max: 8,
            dm_weight: 1.0,
            gan_weight: 0.1,
            teacher_cfg: 4.0,
            lr: 5e-5,
        }
    }
}

/// Strided convolutional discriminator over latent sequences `(B, 64, T)`.
pub struct LatentDisc {
    convs: Vec<candle_nn::Conv1d>,
    head: candle_nn::Conv1d,
}

impl LatentDisc {
    pub fn build(latent_dim: usize, params: &mut Params, rng: &mut TensorRng) -> Result<Self> {
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("latent_disc");
        let plan = [
            (latent_dim, 64usize, 2usize),
            (64, 64, 2),
            (64, 96, 2),
            (96, 96, 2),
            (96, 96, 1),
            (96, 96, 1),
        ];
        let mut convs = Vec::new();
        for (i, &(cin, cout, s)) in plan.iter().enumerate() {
            let (k, p) = if s == 1 { (3, 1) } else { (4, 1) };
            convs.push(b.conv1d(&format!("conv{i}"), cin, cout, k, s, p)?);
        }
        let head = b.conv1d("head", 96, 1, 1, 1, 0)?;
        Ok(Self { convs, head })
    }

    /// Patch logits from `(B, T, D)` latents.
    pub fn forward(&self, latents: &Tensor) -> Result<Tensor> {
        let mut h = latents.transpose(1, 2)?.contiguous()?; // (B, D, T)
        for conv in &self.convs {
            h = conv.forward(&h)?;
            h = candle_nn::ops::silu(&h)?;
        }
        Ok(self.head.forward(&h)?)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistillLosses {
    pub dm: f32,
    pub gan_g: f32,
    pub gan_d: f32,
    pub fake_score: f32,
    pub shift: f64,
    pub steps: usize,
}

/// One batch of real latents with pre-embedded conditions.
pub struct DistillBatch<'a> {
    /// Real data latents `(B, T, 64)`.
    pub real: Tensor,
    /// Source latents `(B, T, 64)` (silence for text-to-music).
    pub source: Tensor,
    /// Mask `(B, T)`.
    pub mask: Tensor,
    pub bundles: Vec<&'a ConditionBundle>,
    pub null_bundles: Vec<&'a ConditionBundle>,
}

pub struct DistillState {
    pub student: DiT,
    pub student_params: Params,
    pub fake: DiT,
    pub fake_params: Params,
    pub disc: LatentDisc,
    pub disc_params: Params,
    pub config: DistillConfig,
    student_opt: AdamW,
    fake_opt: AdamW,
    disc_opt: AdamW,
    rng: TensorRng,
    pub shift_counts: Vec<usize>,
}

impl DistillState {
    /// Builds student and fake-score networks initialized from the teacher
    /// weights (same architecture), plus a fresh discriminator.
    pub fn new(
        dit_config: &DiTConfig,
        teacher_params: &Params,
        config: DistillConfig,
        seed: u64,
        device: &candle_core::Device,
    ) -> Result<Self> {
        let mut rng = TensorRng::new(seed, device);
        let teacher_map = teacher_params.tensor_map();

        let mut student_params = Params::new();
        let student = DiT::build(dit_config, &mut student_params, &mut rng)?;
        student_params.load_tensor_map(&teacher_map).map_err(SamplerError::Nn)?;

        let mut fake_params = Params::new();
        let fake = DiT::build(dit_config, &mut fake_params, &mut rng)?;
        fake_params.load_tensor_map(&teacher_map).map_err(SamplerError::Nn)?;

        let mut disc_params = Params::new();
        let disc = LatentDisc::build(dit_config.latent_dim, &mut disc_params, &mut rng)?;

        let student_opt = AdamW::new(config.lr, student_params.len());
        let fake_opt = AdamW::new(config.lr * 2.0, fake_params.len());
        let disc_opt = AdamW::new(config.lr * 2.0, disc_params.len());
        let n_shifts = config.shift_set.len();
        Ok(Self {
            student,
            student_params,
            fake,
            fake_params,
            disc,
            disc_params,
            config,
            student_opt,
            fake_opt,
            disc_opt,
            rng: rng.fork(0x444d44),
            shift_counts: vec![0; n_shifts],
        })
    }

    /// Draws (shift, steps) for one distillation step; counts the shift
    /// for the uniformity check.
    pub fn draw_shift_and_steps(&mut self) -> (f64, usize) {
        let si = self.rng.gen_range(0..self.config.shift_set.len());
        self.shift_counts[si] += 1;
        let steps =
            self.rng.gen_range(self.config.steps_min..self.config.steps_max + 1);
        (self.config.shift_set[si], steps)
    }

    /// Student sample with gradient through the final model evaluation
    /// only (the earlier Euler steps run detached): after j detached
    /// steps, the one-step-to-data prediction `x + (1-t) v(x, t)`.
    fn student_rollout(
        &mut self,
        batch: &DistillBatch,
        shift: f64,
        steps: usize,
    ) -> Result<Tensor> {
        let (b, t_len, d) = batch.real.dims3()?;
        let schedule = make_schedule(steps, shift)?;
        let j = self.rng.gen_range(0..steps);
        let mut x = self.rng.randn(&[b, t_len, d], 1.0)?;
        for k in 0..j {
            let t_k = schedule.times[k];
            let dt = schedule.times[k + 1] - t_k;
            let t = Tensor::from_vec(vec![t_k as f32; b], b, x.device())?;
            let composed = compose_t(&batch.source, &x, &batch.mask)?;
            let (v, _) = self.student.forward(&composed, &t, &batch.bundles, false)?;
            x = (x + (v * dt)?)?.detach();
        }
        let t_j = schedule.times[j];
        let t = Tensor::from_vec(vec![t_j as f32; b], b, x.device())?;
        let composed = compose_t(&batch.source, &x, &batch.mask)?;
        let (v, _) = self.student.forward(&composed, &t, &batch.bundles, false)?;
        Ok((x + (v * (1.0 - t_j))?)?)
    }

    /// Velocity of the frozen guided teacher.
    fn teacher_velocity(
        &self,
        teacher: &DiT,
        batch: &DistillBatch,
        x: &Tensor,
        t: &Tensor,
    ) -> Result<Tensor> {
        let composed = compose_t(&batch.source, x, &batch.mask)?;
        let (v_cond, _) = teacher.forward(&composed, t, &batch.bundles, false)?;
        let w = self.config.teacher_cfg;
        if w == 0.0 || w == 1.0 {
            return Ok(v_cond);
        }
        let (v_null, _) = teacher.forward(&composed, t, &batch.null_bundles, false)?;
        Ok(((&v_cond - &v_null)? * w)?.add(&v_null)?)
    }

    /// One full distillation step; the teacher stays frozen.
    pub fn distill_step(&mut self, teacher: &DiT, batch: &DistillBatch) -> Result<DistillLosses> {
        let (b, t_len, d) = batch.real.dims3()?;
        let (shift, steps) = self.draw_shift_and_steps();

        // (b) student sample along the shifted schedule.
        let x_hat = self.student_rollout(batch, shift, steps)?;

        // (c) distribution-matching gradient at a re-noised sample.
        let tau = 0.02 + 0.96 * self.rng.gen_f64();
        let eps = self.rng.randn(&[b, t_len, d], 1.0)?;
        let x_hat_d = x_hat.detach();
        let y = ((&eps * (1.0 - tau))? + (&x_hat_d * tau)?)?;
        let t = Tensor::from_vec(vec![tau as f32; b], b, y.device())?;
        let v_real = self.teacher_velocity(teacher, batch, &y, &t)?;
        let composed_y = compose_t(&batch.source, &y, &batch.mask)?;
        let (v_fake, _) = self.fake.forward(&composed_y, &t, &batch.bundles, false)?;
        let x0_real = (&y + (&v_real * (1.0 - tau))?)?.detach();
        let x0_fake = (&y + (&v_fake * (1.0 - tau))?)?.detach();
        let normalizer = (&x0_real - &x_hat_d)?
            .abs()?
            .mean_all()?
            .to_scalar::<f32>()?
            .max(1e-3) as f64;
        let grad = ((&x0_fake - &x0_real)? / normalizer)?;
        let target = (&x_hat_d - &grad)?;
        let dm_loss = ((&x_hat - &target)?.sqr()?.mean_all()? * 0.5)?;

        // (d) adversarial term on the student sample.
        let d_fake_g = self.disc.forward(&x_hat)?;
        let gan_g = (d_fake_g - 1.0)?.sqr()?.mean_all()?;

        let student_loss =
            ((&dm_loss * self.config.dm_weight)? + (&gan_g * self.config.gan_weight)?)?;
        let losses = DistillLosses {
            dm: dm_loss.to_scalar::<f32>()?,
            gan_g: gan_g.to_scalar::<f32>()?,
            gan_d: 0.0,
            fake_score: 0.0,
            shift,
            steps,
        };
        if !losses.dm.is_finite() || !losses.gan_g.is_finite() {
            return Err(SamplerError::Domain(format!(
                "non-finite distill losses dm={} gan_g={}",
                losses.dm, losses.gan_g
            )));
        }
        let grads = student_loss.backward()?;
        self.student_opt.step(&self.student_params, &grads)?;

        // (e1) discriminator update on real vs detached student samples.
        let d_real = self.disc.forward(&batch.real)?;
        let d_fake = self.disc.forward(&x_hat_d)?;
        let disc_loss = ((d_real - 1.0)?.sqr()?.mean_all()? + d_fake.sqr()?.mean_all()?)?;
        let gan_d = disc_loss.to_scalar::<f32>()?;
        let grads = disc_loss.backward()?;
        self.disc_opt.step(&self.disc_params, &grads)?;

        // (e2) fake-score update: flow matching toward the student's
        // current sample distribution.
        let t2 = self.rng.gen_f64();
        let eps2 = self.rng.randn(&[b, t_len, d], 1.0)?;
        let x_t2 = ((&eps2 * (1.0 - t2))? + (&x_hat_d * t2)?)?;
        let tt2 = Tensor::from_vec(vec![t2 as f32; b], b, x_t2.device())?;
        let composed2 = compose_t(&batch.source, &x_t2, &batch.mask)?;
        let (v_pred, _) = self.fake.forward(&composed2, &tt2, &batch.bundles, false)?;
        let v_target = (&x_hat_d - &eps2)?;
        let fake_loss = (v_pred - v_target)?.sqr()?.mean_all()?;
        let fake_score = fake_loss.to_scalar::<f32>()?;
        let grads = fake_loss.backward()?;
        self.fake_opt.step(&self.fake_params, &grads)?;

        if !gan_d.is_finite() || !fake_score.is_finite() {
            return Err(SamplerError::Domain(format!(
                "non-finite distill losses gan_d={gan_d} fake={fake_score}"
            )));
        }
        Ok(DistillLosses { gan_d, fake_score, ..losses })
    }
}

/// Chi-squared statistic of observed shift counts against uniform.
pub fn shift_chi2(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// 99th percentile of chi-squared with 2 degrees of freedom: the shift
/// histogram passes the uniformity check (p > 0.01) below this value.
pub const CHI2_DOF2_P99: f64 = 9.21034;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_draws_are_uniform_thirds() {
        let dev = candle_core::Device::Cpu;
        let cfg = DiTConfig {
            layers: 2,
            width: 32,
            heads: 2,
            kv_heads: 1,
            text_layers: 1,
            ..Default::default()
        };
        let mut rng = TensorRng::new(0, &dev);
        let mut params = Params::new();
        let _dit = DiT::build(&cfg, &mut params, &mut rng).unwrap();
        let mut state =
            DistillState::new(&cfg, &params, DistillConfig::default(), 1, &dev).unwrap();
        for _ in 0..3000 {
            let (shift, steps) = state.draw_shift_and_steps();
            assert!([1.0, 2.0, 3.0].contains(&shift));
            assert!((4..=8).contains(&steps));
        }
        let chi2 = shift_chi2(&state.shift_counts);
        assert!(chi2 < CHI2_DOF2_P99, "chi2 {chi2}, counts {:?}", state.shift_counts);
    }
}
