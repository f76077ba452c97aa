//! Seeded tensor construction. The CPU device RNG in candle cannot be
//! seeded, so every random tensor in the workspace comes from here.

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct TensorRng {
    rng: ChaCha8Rng,
    device: Device,
}

impl TensorRng {
    pub fn new(seed: u64, device: &Device) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), device: device.clone() }
    }

    /// Independent child stream (for per-module init streams).
    pub fn fork(&mut self, salt: u64) -> Self {
        let seed = self.rng.gen::<u64>() ^ salt;
        Self { rng: ChaCha8Rng::seed_from_u64(seed), device: self.device.clone() }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn randn(&mut self, shape: &[usize], std: f64) -> candle_core::Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut self.rng);
                (v * std) as f32
            })
            .collect();
        Tensor::from_vec(data, shape, &self.device)
    }

    pub fn randn_f64(&mut self, shape: &[usize], std: f64) -> candle_core::Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut self.rng);
                v * std
            })
            .collect();
        Tensor::from_vec(data, shape, &self.device)
    }

    pub fn uniform(&mut self, shape: &[usize], lo: f32, hi: f32) -> candle_core::Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|_| self.rng.gen_range(lo..hi)).collect();
        Tensor::from_vec(data, shape, &self.device)
    }

    /// Bernoulli {0,1} mask as f32.
    pub fn bernoulli(&mut self, shape: &[usize], p: f64) -> candle_core::Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f32> =
            (0..n).map(|_| if self.rng.gen_bool(p) { 1.0 } else { 0.0 }).collect();
        Tensor::from_vec(data, shape, &self.device)
    }

    pub fn gen_range(&mut self, range: std::ops::Range<usize>) -> usize {
        self.rng.gen_range(range)
    }

    pub fn gen_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn gen_u64(&mut self) -> u64 {
        self.rng.gen::<u64>()
    }

    pub fn gen_bool(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    /// Samples an index proportional to the given weights.
    pub fn choose_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut r = self.rng.gen::<f64>() * total;
        for (i, &w) in weights.iter().enumerate() {
            r -= w;
            if r <= 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }

    /// Standard-normal tensor cast helper with the dtype of `like`.
    pub fn randn_like(&mut self, like: &Tensor) -> candle_core::Result<Tensor> {
        match like.dtype() {
            DType::F64 => self.randn_f64(like.dims(), 1.0),
            _ => self.randn(like.dims(), 1.0),
        }
    }
}
