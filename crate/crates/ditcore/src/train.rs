//! Training wrapper: owns DiT + condition encoders + optimizer, applies
//! classifier-free condition dropout, and runs masked flow-matching steps.

use crate::cond::{CondEncoders, CondInputs};
use crate::config::DiTConfig;
use crate::flow::{fm_loss, FlowBatch};
use crate::model::DiT;
use crate::{DitError, Result};
use candle_core::{Device, Tensor};
use latentcodec::LatentSeq;
use nnkit::{AdamW, Params, TensorRng};

/// One prepared training item.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub data: LatentSeq,
    pub source: LatentSeq,
    pub mask: Vec<f32>,
    pub cond: CondInputs,
}

pub struct DiTTrainer {
    pub model: DiT,
    pub encoders: CondEncoders,
    pub params: Params,
    opt: AdamW,
    rng: TensorRng,
    /// Probability of dropping every condition jointly (CFG null).
    pub joint_null_p: f64,
    /// Additional independent per-condition dropout.
    pub indep_null_p: f64,
}

impl DiTTrainer {
    pub fn new(
        config: &DiTConfig,
        caption_vocab: usize,
        seed: u64,
        device: &Device,
        lr: f64,
    ) -> Result<Self> {
        let mut rng = TensorRng::new(seed, device);
        let mut params = Params::new();
        let model = DiT::build(config, &mut params, &mut rng)?;
        let encoders = CondEncoders::build(config, caption_vocab, &mut params, &mut rng)?;
        let opt = AdamW::new(lr, params.len()).with_weight_decay(0.01);
        Ok(Self {
            model,
            encoders,
            params,
            opt,
            rng: rng.fork(0x444954),
            joint_null_p: 0.1,
            indep_null_p: 0.05,
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.opt.set_lr(lr);
    }

    fn apply_cfg_dropout(&mut self, cond: &CondInputs) -> CondInputs {
        let mut c = cond.clone();
        if self.rng.gen_bool(self.joint_null_p) {
            c.null_caption = true;
            c.null_lyrics = true;
            c.null_timbre = true;
            return c;
        }
        if self.rng.gen_bool(self.indep_null_p) {
            c.null_caption = true;
        }
        if self.rng.gen_bool(self.indep_null_p) {
            c.null_lyrics = true;
        }
        if self.rng.gen_bool(self.indep_null_p) {
            c.null_timbre = true;
        }
        c
    }

    /// One optimization step over same-length items. Returns (loss, grad norm).
    pub fn step(&mut self, items: &[TrainItem]) -> Result<(f32, f64)> {
        if items.is_empty() {
            return Err(DitError::Contract("empty batch".into()));
        }
        let t_len = items[0].data.t;
        if items.iter().any(|i| i.data.t != t_len) {
            return Err(DitError::Shape("batch items must share sequence length".into()));
        }
        let device = self.model.device().clone();
        let b = items.len();
        let d = items[0].data.dim;

        let mut data = Vec::with_capacity(b * t_len * d);
        let mut source = Vec::with_capacity(b * t_len * d);
        let mut mask = Vec::with_capacity(b * t_len);
        for item in items {
            data.extend_from_slice(&item.data.frames);
            source.extend_from_slice(&item.source.frames);
            mask.extend_from_slice(&item.mask);
        }
        let data = Tensor::from_vec(data, (b, t_len, d), &device)?;
        let source = Tensor::from_vec(source, (b, t_len, d), &device)?;
        let mask = Tensor::from_vec(mask, (b, t_len), &device)?;
        let noise = self.rng.randn(&[b, t_len, d], 1.0)?;
        let t = self.rng.uniform(&[b], 0.0, 1.0)?;

        let conds: Vec<CondInputs> =
            items.iter().map(|i| self.apply_cfg_dropout(&i.cond)).collect();
        let bundles: Vec<_> = conds
            .iter()
            .map(|c| self.encoders.embed(c))
            .collect::<Result<Vec<_>>>()?;
        let bundle_refs: Vec<&_> = bundles.iter().collect();

        let batch = FlowBatch { data, source, mask, noise, t, bundles: bundle_refs };
        let loss = fm_loss(&self.model, &batch)?;
        let loss_val = loss.to_scalar::<f32>()?;
        if !loss_val.is_finite() {
            return Err(DitError::Contract(format!("non-finite fm loss {loss_val}")));
        }
        let grads = loss.backward()?;
        let norm = self.opt.step(&self.params, &grads)?;
        Ok((loss_val, norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cond::CaptionTokenizer;

    #[test]
    fn overfit_single_batch_loss_decreases() {
        let dev = Device::Cpu;
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
        let mut trainer = DiTTrainer::new(&cfg, tok.vocab_size(), 0, &dev, 2e-3).unwrap();
        trainer.joint_null_p = 0.0;
        trainer.indep_null_p = 0.0;

        let mut rng = TensorRng::new(5, &dev);
        let data = LatentSeq::from_tensor(&rng.randn(&[20, 64], 1.0).unwrap(), 25.0).unwrap();
        let item = TrainItem {
            data,
            source: LatentSeq::zeros(20, 64, 25.0),
            mask: vec![1.0; 20],
            cond: CondInputs::new(tok.encode("a lofi track at 80 bpm"), vec![1, 2, 3]),
        };
        let (first, _) = trainer.step(std::slice::from_ref(&item)).unwrap();
        let mut last = first;
        for _ in 0..30 {
            let (l, _) = trainer.step(std::slice::from_ref(&item)).unwrap();
            last = l;
        }
        assert!(
            last < first * 0.8,
            "loss did not decrease: first {first}, last {last}"
        );
    }
}
