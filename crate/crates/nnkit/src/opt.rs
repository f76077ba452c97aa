//! AdamW with decoupled weight decay and global-norm gradient clipping.

use crate::params::Params;
use crate::Result;
use candle_core::backprop::GradStore;
use candle_core::Tensor;

pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    step: usize,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl AdamW {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: Some(1.0),
            step: 0,
            m: vec![None; n_params],
            v: vec![None; n_params],
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn with_clip(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// Applies one update; returns the pre-clip global gradient norm.
    pub fn step(&mut self, params: &Params, grads: &GradStore) -> Result<f64> {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);

        let mut sq_norm = 0f64;
        for (_, var) in params.named() {
            if let Some(g) = grads.get(var.as_tensor()) {
                sq_norm += g.sqr()?.sum_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
            }
        }
        let norm = sq_norm.sqrt();
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };

        for (i, (_, var)) in params.named().iter().enumerate() {
            let Some(g) = grads.get(var.as_tensor()) else { continue };
            let g = if scale != 1.0 { (g * scale)? } else { g.clone() };
            let m_prev = match &self.m[i] {
                Some(m) => m.clone(),
                None => g.zeros_like()?,
            };
            let v_prev = match &self.v[i] {
                Some(v) => v.clone(),
                None => g.zeros_like()?,
            };
            let m = ((m_prev * self.beta1)? + (&g * (1.0 - self.beta1))?)?;
            let v = ((v_prev * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?;
            let m_hat = (&m / bc1)?;
            let v_hat = (&v / bc2)?;
            let update = (m_hat / (v_hat.sqrt()? + self.eps)?)?;
            let mut next = (var.as_tensor() - (update * self.lr)?)?;
            if self.weight_decay > 0.0 {
                next = (next - (var.as_tensor() * (self.lr * self.weight_decay))?)?;
            }
            var.set(&next)?;
            self.m[i] = Some(m);
            self.v[i] = Some(v);
        }
        Ok(norm)
    }
}
