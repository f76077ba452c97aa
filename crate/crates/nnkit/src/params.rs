//! Ordered parameter store and layer builders with seeded initialization.

use crate::rng::TensorRng;
use crate::Result;
use candle_core::{DType, Tensor, Var};
use candle_nn::{Conv1d, Conv1dConfig, Embedding, LayerNorm, Linear};

/// Named, ordered trainable parameters of one model.
#[derive(Default)]
pub struct Params {
    vars: Vec<(String, Var)>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, var: Var) {
        self.vars.push((name.into(), var));
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter().map(|(_, v)| v)
    }

    pub fn named(&self) -> &[(String, Var)] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.vars.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Copies every parameter value from another store (same layout).
    pub fn copy_from(&mut self, other: &Params) -> Result<()> {
        assert_eq!(self.vars.len(), other.vars.len(), "param layout mismatch");
        for ((_, dst), (_, src)) in self.vars.iter().zip(other.vars.iter()) {
            dst.set(src.as_tensor())?;
        }
        Ok(())
    }

    pub fn tensor_map(&self) -> std::collections::HashMap<String, Tensor> {
        self.vars.iter().map(|(n, v)| (n.clone(), v.as_tensor().clone())).collect()
    }

    pub fn load_tensor_map(
        &mut self,
        map: &std::collections::HashMap<String, Tensor>,
    ) -> Result<()> {
        for (name, var) in &self.vars {
            let t = map.get(name).ok_or_else(|| {
                crate::NnError::Checkpoint(format!("missing tensor {name}"))
            })?;
            var.set(t)?;
        }
        Ok(())
    }
}

/// Builds layers with seeded init, registering parameters under a prefix.
pub struct Builder<'a> {
    pub params: &'a mut Params,
    pub rng: &'a mut TensorRng,
    pub prefix: String,
    pub dtype: DType,
}

impl<'a> Builder<'a> {
    pub fn new(params: &'a mut Params, rng: &'a mut TensorRng) -> Self {
        Self { params, rng, prefix: String::new(), dtype: DType::F32 }
    }

    pub fn with_dtype(params: &'a mut Params, rng: &'a mut TensorRng, dtype: DType) -> Self {
        Self { params, rng, prefix: String::new(), dtype }
    }

    pub fn sub(&mut self, name: &str) -> Builder<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Builder { params: self.params, rng: self.rng, prefix, dtype: self.dtype }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    fn randn(&mut self, shape: &[usize], std: f64) -> Result<Tensor> {
        let t = match self.dtype {
            DType::F64 => self.rng.randn_f64(shape, std)?,
            _ => self.rng.randn(shape, std)?,
        };
        Ok(t)
    }

    pub fn var(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let t = self.randn(shape, std)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.params.push(self.full(name), var);
        Ok(out)
    }

    pub fn zeros_var(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let t = Tensor::zeros(shape, self.dtype, self.rng.device())?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.params.push(self.full(name), var);
        Ok(out)
    }

    /// Linear layer with Kaiming-style init.
    pub fn linear(&mut self, name: &str, in_dim: usize, out_dim: usize) -> Result<Linear> {
        let std = (2.0 / in_dim as f64).sqrt();
        let w = self.var(&format!("{name}.weight"), &[out_dim, in_dim], std)?;
        let b = self.zeros_var(&format!("{name}.bias"), &[out_dim])?;
        Ok(Linear::new(w, Some(b)))
    }

    pub fn linear_no_bias(&mut self, name: &str, in_dim: usize, out_dim: usize) -> Result<Linear> {
        let std = (2.0 / in_dim as f64).sqrt();
        let w = self.var(&format!("{name}.weight"), &[out_dim, in_dim], std)?;
        Ok(Linear::new(w, None))
    }

    pub fn conv1d(
        &mut self,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Conv1d> {
        let std = (2.0 / (in_ch * kernel) as f64).sqrt();
        let w = self.var(&format!("{name}.weight"), &[out_ch, in_ch, kernel], std)?;
        let b = self.zeros_var(&format!("{name}.bias"), &[out_ch])?;
        let cfg = Conv1dConfig { padding, stride, dilation: 1, groups: 1, cudnn_fwd_algo: None };
        Ok(Conv1d::new(w, Some(b), cfg))
    }

    pub fn embedding(&mut self, name: &str, vocab: usize, dim: usize) -> Result<Embedding> {
        let w = self.var(&format!("{name}.weight"), &[vocab, dim], 0.02)?;
        Ok(Embedding::new(w, dim))
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize) -> Result<LayerNorm> {
        let w = Var::from_tensor(&Tensor::ones(&[dim], self.dtype, self.rng.device())?)?;
        let b = Var::from_tensor(&Tensor::zeros(&[dim], self.dtype, self.rng.device())?)?;
        let (wt, bt) = (w.as_tensor().clone(), b.as_tensor().clone());
        self.params.push(self.full(&format!("{name}.weight")), w);
        self.params.push(self.full(&format!("{name}.bias")), b);
        Ok(LayerNorm::new(wt, bt, 1e-5))
    }
}
