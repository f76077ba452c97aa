//! Waveform-domain 1D VAE with adversarial fine-tuning.
//!
//! Encoder: strided conv stack (stride product = samples per latent frame).
//! Decoder: mirrored nearest-upsample + conv stages (conv-transpose has no
//! backward on this backend). Reconstruction loss is multi-resolution
//! spectral distance plus L1, with KL and an LSGAN term per phase.

use crate::types::{CodecConfig, LatentSeq};
use crate::{CodecError, Result};
use candle_core::{Device, Module, Tensor, D};
use nnkit::{AdamW, Builder, Params, TensorRng};
use serde::{Deserialize, Serialize};

/// STFT resolutions (FFT sizes) for the spectral loss; hop is size/4.
pub const STFT_SIZES: [usize; 3] = [256, 512, 1024];

fn conv_geometry(stride: usize) -> (usize, usize) {
    // Kernel/padding that map length L exactly to L/stride.
    if stride % 2 == 0 {
        (2 * stride, stride / 2)
    } else {
        (2 * stride + 1, (stride + 1) / 2)
    }
}

/// Nearest-neighbor upsample on the last (time) axis.
fn upsample_nearest(x: &Tensor, factor: usize) -> candle_core::Result<Tensor> {
    let (b, c, l) = x.dims3()?;
    x.unsqueeze(3)?
        .expand((b, c, l, factor))?
        .reshape((b, c, l * factor))
}

pub struct Vae {
    pub config: CodecConfig,
    enc_convs: Vec<candle_nn::Conv1d>,
    enc_head: candle_nn::Conv1d,
    dec_convs: Vec<candle_nn::Conv1d>,
    dec_in: candle_nn::Conv1d,
    dec_out: candle_nn::Conv1d,
    device: Device,
}

impl Vae {
    pub fn build(config: &CodecConfig, params: &mut Params, rng: &mut TensorRng) -> Result<Self> {
        config.validate()?;
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("vae");
        let mut enc_convs = Vec::new();
        let mut in_ch = 2usize;
        for (i, (&stride, &ch)) in config.strides.iter().zip(&config.channels).enumerate() {
            let (k, p) = conv_geometry(stride);
            enc_convs.push(b.conv1d(&format!("enc{i}"), in_ch, ch, k, stride, p)?);
            in_ch = ch;
        }
        let enc_head = b.conv1d("enc_head", in_ch, 2 * config.latent_dim, 1, 1, 0)?;

        let dec_in = b.conv1d("dec_in", config.latent_dim, in_ch, 1, 1, 0)?;
        let mut dec_convs = Vec::new();
        let n = config.strides.len();
        for i in (0..n).rev() {
            let stride = config.strides[i];
            let out_ch = if i == 0 { config.channels[0] } else { config.channels[i - 1] };
            let k = 2 * stride + 1;
            dec_convs.push(b.conv1d(&format!("dec{i}"), config.channels[i], out_ch, k, 1, stride)?);
        }
        let dec_out = b.conv1d("dec_out", config.channels[0], 2, 7, 1, 3)?;

        Ok(Self {
            config: config.clone(),
            enc_convs,
            enc_head,
            dec_convs,
            dec_in,
            dec_out,
            device: rng.device().clone(),
        })
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Pads (or rejects) a wave so its length divides the frame size.
    pub fn prepare_len(&self, len: usize) -> Result<usize> {
        let spf = self.config.samples_per_frame();
        if len % spf == 0 {
            Ok(len)
        } else if self.config.pad_input {
            Ok(len.div_ceil(spf) * spf)
        } else {
            Err(CodecError::NonDivisibleLength(len, spf))
        }
    }

    /// Encoder forward: `(B, 2, L)` -> `(mean, logvar)` each `(B, D, T)`.
    pub fn encode_t(&self, wave: &Tensor) -> Result<(Tensor, Tensor)> {
        let (_b, c, l) = wave.dims3()?;
        if c != 2 {
            return Err(CodecError::Invariant(format!("expected stereo input, got {c} ch")));
        }
        let spf = self.config.samples_per_frame();
        let target = self.prepare_len(l)?;
        let mut h = if target != l {
            wave.pad_with_zeros(D::Minus1, 0, target - l)?
        } else {
            wave.clone()
        };
        let _ = spf;
        for conv in &self.enc_convs {
            h = conv.forward(&h)?;
            h = candle_nn::ops::silu(&h)?;
        }
        let stats = self.enc_head.forward(&h)?;
        let mean = stats.narrow(1, 0, self.config.latent_dim)?;
        let logvar = stats.narrow(1, self.config.latent_dim, self.config.latent_dim)?;
        // Keep the variance head in a sane range.
        let logvar = logvar.clamp(-12.0, 6.0)?;
        Ok((mean, logvar))
    }

    /// Decoder forward: `(B, D, T)` -> `(B, 2, T * spf)` (unclamped).
    pub fn decode_t(&self, latent: &Tensor) -> Result<Tensor> {
        let mut h = self.dec_in.forward(latent)?;
        h = candle_nn::ops::silu(&h)?;
        let n = self.config.strides.len();
        for (j, conv) in self.dec_convs.iter().enumerate() {
            let stride = self.config.strides[n - 1 - j];
            h = upsample_nearest(&h, stride)?;
            h = conv.forward(&h)?;
            h = candle_nn::ops::silu(&h)?;
        }
        Ok(self.dec_out.forward(&h)?)
    }

    /// Single-item encode to a [`LatentSeq`] (posterior mean).
    pub fn encode_wave(&self, left: &[f32], right: &[f32]) -> Result<LatentSeq> {
        let l = left.len();
        let mut data = Vec::with_capacity(2 * l);
        data.extend_from_slice(left);
        data.extend_from_slice(right);
        let wave = Tensor::from_vec(data, (1, 2, l), &self.device)?;
        let (mean, _) = self.encode_t(&wave)?;
        let mean = mean.squeeze(0)?.transpose(0, 1)?.contiguous()?; // (T, D)
        LatentSeq::from_tensor(&mean, f64::from(self.config.latent_rate))
    }

    /// Single-item decode to a stereo waveform, clamped to [-1, 1].
    pub fn decode_latent(&self, latent: &LatentSeq) -> Result<[Vec<f32>; 2]> {
        let t = latent.to_tensor(&self.device)?.transpose(0, 1)?.unsqueeze(0)?.contiguous()?;
        let wave = self.decode_t(&t)?;
        let wave = wave.squeeze(0)?;
        let max = wave.abs()?.max_all()?.to_scalar::<f32>()?;
        if !max.is_finite() {
            return Err(CodecError::NonFinite("decoded waveform".into()));
        }
        let wave = wave.clamp(-1.0, 1.0)?;
        let left = wave.get(0)?.to_vec1::<f32>()?;
        let right = wave.get(1)?.to_vec1::<f32>()?;
        Ok([left, right])
    }
}

/// Strided convolutional discriminator over waveforms (LSGAN objective).
pub struct WaveDiscriminator {
    convs: Vec<candle_nn::Conv1d>,
    head: candle_nn::Conv1d,
}

impl WaveDiscriminator {
    pub fn build(params: &mut Params, rng: &mut TensorRng) -> Result<Self> {
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("disc");
        let widths = [(2usize, 16usize, 4usize), (16, 32, 4), (32, 64, 4), (64, 64, 3)];
        let mut convs = Vec::new();
        for (i, &(cin, cout, s)) in widths.iter().enumerate() {
            let (k, p) = conv_geometry(s);
            convs.push(b.conv1d(&format!("conv{i}"), cin, cout, k, s, p)?);
        }
        let head = b.conv1d("head", 64, 1, 1, 1, 0)?;
        Ok(Self { convs, head })
    }

    /// Patch logits `(B, 1, T')`.
    pub fn forward(&self, wave: &Tensor) -> Result<Tensor> {
        let mut h = wave.clone();
        for conv in &self.convs {
            h = conv.forward(&h)?;
            h = candle_nn::ops::silu(&h)?;
        }
        Ok(self.head.forward(&h)?)
    }
}

/// Training phase of the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaePhase {
    Warmup,
    AdversarialFinal,
}

/// Separated loss components of one VAE training step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VaeLosses {
    pub spectral: f32,
    pub l1: f32,
    pub kl: f32,
    pub adv_g: f32,
    pub disc: f32,
    pub kl_weight: f64,
    pub adv_weight: f64,
    pub total: f32,
}

/// Fixed DFT bases for the multi-resolution spectral loss.
struct StftBasis {
    weight: Tensor,
    n_fft: usize,
    hop: usize,
    bins: usize,
}

fn build_stft_bases(device: &Device) -> Result<Vec<StftBasis>> {
    let mut bases = Vec::new();
    for &n in STFT_SIZES.iter() {
        let bins = n / 2 + 1;
        let mut w = vec![0f32; 2 * bins * n];
        for k in 0..bins {
            for i in 0..n {
                let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
                let ang = 2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64;
                w[k * n + i] = (hann * ang.cos()) as f32;
                w[(bins + k) * n + i] = (hann * ang.sin()) as f32;
            }
        }
        let weight = Tensor::from_vec(w, (2 * bins, 1, n), device)?;
        bases.push(StftBasis { weight, n_fft: n, hop: n / 4, bins });
    }
    Ok(bases)
}

/// Multi-resolution spectral distance (linear + log magnitude L1).
fn spectral_loss(bases: &[StftBasis], x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (b, c, l) = x.dims3()?;
    let xm = x.reshape((b * c, 1, l))?;
    let ym = y.reshape((b * c, 1, l))?;
    let mut total: Option<Tensor> = None;
    for basis in bases {
        if l < basis.n_fft {
            continue;
        }
        let spec_x = stft_mag(basis, &xm)?;
        let spec_y = stft_mag(basis, &ym)?;
        let lin = (&spec_x - &spec_y)?.abs()?.mean_all()?;
        let log_x = (spec_x + 1e-5)?.log()?;
        let log_y = (spec_y + 1e-5)?.log()?;
        let log = (log_x - log_y)?.abs()?.mean_all()?;
        let term = (lin + log)?;
        total = Some(match total {
            Some(t) => (t + term)?,
            None => term,
        });
    }
    total.ok_or_else(|| CodecError::Invariant("input shorter than every STFT window".into()))
}

fn stft_mag(basis: &StftBasis, x: &Tensor) -> Result<Tensor> {
    let spec = x.conv1d(&basis.weight, 0, basis.hop, 1, 1)?; // (B, 2*bins, frames)
    let re = spec.narrow(1, 0, basis.bins)?;
    let im = spec.narrow(1, basis.bins, basis.bins)?;
    Ok((re.sqr()? + im.sqr()?)?.sqrt()?)
}

/// Owns VAE + discriminator parameters and their optimizers.
pub struct VaeTrainer {
    pub vae: Vae,
    pub disc: WaveDiscriminator,
    pub vae_params: Params,
    pub disc_params: Params,
    vae_opt: AdamW,
    disc_opt: AdamW,
    bases: Vec<StftBasis>,
    noise_rng: TensorRng,
}

impl VaeTrainer {
    pub fn new(config: &CodecConfig, seed: u64, device: &Device, lr: f64) -> Result<Self> {
        let mut rng = TensorRng::new(seed, device);
        let mut vae_params = Params::new();
        let vae = Vae::build(config, &mut vae_params, &mut rng)?;
        let mut disc_params = Params::new();
        let disc = WaveDiscriminator::build(&mut disc_params, &mut rng)?;
        let vae_opt = AdamW::new(lr, vae_params.len());
        let disc_opt = AdamW::new(lr * 0.5, disc_params.len());
        let bases = build_stft_bases(device)?;
        let noise_rng = rng.fork(0x564145);
        Ok(Self { vae, disc, vae_params, disc_params, vae_opt, disc_opt, bases, noise_rng })
    }

    pub fn weights_for(&self, phase: VaePhase) -> (f64, f64) {
        match phase {
            VaePhase::Warmup => (self.vae.config.kl_weight, self.vae.config.adv_weight_warmup),
            VaePhase::AdversarialFinal => (0.0, self.vae.config.adv_weight_final),
        }
    }

    /// Reconstruction-loss components against a target (no parameter update).
    pub fn recon_losses(&self, recon: &Tensor, target: &Tensor) -> Result<(Tensor, Tensor)> {
        let spectral = spectral_loss(&self.bases, recon, target)?;
        let l1 = (recon - target)?.abs()?.mean_all()?;
        Ok((spectral, l1))
    }

    /// One optimization step on a batch `(B, 2, L)`.
    pub fn step(&mut self, batch: &Tensor, phase: VaePhase) -> Result<VaeLosses> {
        let (kl_weight, adv_weight) = self.weights_for(phase);

        let (mean, logvar) = self.vae.encode_t(batch)?;
        let eps = self.noise_rng.randn(mean.dims(), 1.0)?;
        let z = (&mean + ((logvar.affine(0.5, 0.0))?.exp()? * eps)?)?;
        let recon = self.vae.decode_t(&z)?;

        let (spectral, l1) = self.recon_losses(&recon, batch)?;
        // KL(q || N(0,1)) = 0.5 * mean(mu^2 + exp(lv) - 1 - lv)
        let kl = (((mean.sqr()? + logvar.exp()?)? - 1.0)? - &logvar)?
            .mean_all()?
            .affine(0.5, 0.0)?;

        let adv_g = if adv_weight > 0.0 {
            let d_fake = self.disc.forward(&recon)?;
            (d_fake - 1.0)?.sqr()?.mean_all()?
        } else {
            Tensor::zeros((), candle_core::DType::F32, self.vae.device())?
        };

        let total = (((&spectral + &l1)? + (&kl * kl_weight)?)? + (&adv_g * adv_weight)?)?;

        let losses = VaeLosses {
            spectral: spectral.to_scalar::<f32>()?,
            l1: l1.to_scalar::<f32>()?,
            kl: kl.to_scalar::<f32>()?,
            adv_g: adv_g.to_scalar::<f32>()?,
            disc: 0.0,
            kl_weight,
            adv_weight,
            total: total.to_scalar::<f32>()?,
        };
        for (name, v) in [
            ("spectral", losses.spectral),
            ("l1", losses.l1),
            ("kl", losses.kl),
            ("adv_g", losses.adv_g),
        ] {
            if !v.is_finite() {
                return Err(CodecError::NonFinite(format!("vae loss component {name}={v}")));
            }
        }

        let grads = total.backward()?;
        self.vae_opt.step(&self.vae_params, &grads).map_err(CodecError::Nn)?;

        let mut disc_loss = 0.0;
        if adv_weight > 0.0 {
            let d_real = self.disc.forward(batch)?;
            let d_fake = self.disc.forward(&recon.detach())?;
            let loss_d = ((d_real - 1.0)?.sqr()?.mean_all()? + d_fake.sqr()?.mean_all()?)?;
            disc_loss = loss_d.to_scalar::<f32>()?;
            if !disc_loss.is_finite() {
                return Err(CodecError::NonFinite(format!("disc loss {disc_loss}")));
            }
            let grads = loss_d.backward()?;
            self.disc_opt.step(&self.disc_params, &grads).map_err(CodecError::Nn)?;
        }

        Ok(VaeLosses { disc: disc_loss, ..losses })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.vae_opt.set_lr(lr);
        self.disc_opt.set_lr(lr * 0.5);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> CodecConfig {
        CodecConfig {
            channels: vec![8, 12, 16, 24],
            ..Default::default()
        }
    }

    #[test]
    fn encode_decode_shapes() {
        let dev = Device::Cpu;
        let cfg = tiny_config();
        let mut params = Params::new();
        let mut rng = TensorRng::new(0, &dev);
        let vae = Vae::build(&cfg, &mut params, &mut rng).unwrap();
        // 16 s at 4800 Hz -> 400 latent frames.
        let wave = rng.randn(&[1, 2, 76800], 0.1).unwrap();
        let (mean, logvar) = vae.encode_t(&wave).unwrap();
        assert_eq!(mean.dims(), &[1, 64, 400]);
        assert_eq!(logvar.dims(), &[1, 64, 400]);
        let recon = vae.decode_t(&mean).unwrap();
        assert_eq!(recon.dims(), &[1, 2, 76800]);
    }

    #[test]
    fn zero_wave_latent_shape_contract() {
        let dev = Device::Cpu;
        let cfg = tiny_config();
        let mut params = Params::new();
        let mut rng = TensorRng::new(1, &dev);
        let vae = Vae::build(&cfg, &mut params, &mut rng).unwrap();
        let latent = vae.encode_wave(&vec![0.0; 9600], &vec![0.0; 9600]).unwrap();
        assert_eq!((latent.t, latent.dim), (50, 64));
        assert!(latent.all_finite());
    }

    #[test]
    fn non_divisible_length_errors_without_pad() {
        let dev = Device::Cpu;
        let cfg = CodecConfig { pad_input: false, ..tiny_config() };
        let mut params = Params::new();
        let mut rng = TensorRng::new(2, &dev);
        let vae = Vae::build(&cfg, &mut params, &mut rng).unwrap();
        assert!(matches!(
            vae.prepare_len(1000),
            Err(CodecError::NonDivisibleLength(1000, 192))
        ));
    }

    #[test]
    fn identical_input_gives_zero_recon_loss() {
        let dev = Device::Cpu;
        let trainer = VaeTrainer::new(&tiny_config(), 3, &dev, 1e-3).unwrap();
        let mut rng = TensorRng::new(9, &dev);
        let x = rng.randn(&[1, 2, 4800], 0.3).unwrap();
        let (spec, l1) = trainer.recon_losses(&x, &x).unwrap();
        assert_eq!(spec.to_scalar::<f32>().unwrap(), 0.0);
        assert_eq!(l1.to_scalar::<f32>().unwrap(), 0.0);
    }

    #[test]
    fn phase_weights_follow_schedule() {
        let dev = Device::Cpu;
        let trainer = VaeTrainer::new(&tiny_config(), 4, &dev, 1e-3).unwrap();
        let (kl_w, adv_w) = trainer.weights_for(VaePhase::Warmup);
        assert_eq!(adv_w, 0.1);
        assert!(kl_w > 0.0);
        let (kl_f, adv_f) = trainer.weights_for(VaePhase::AdversarialFinal);
        assert_eq!(kl_f, 0.0);
        assert_eq!(adv_f, 0.5);
    }

    #[test]
    fn train_step_reports_components() {
        let dev = Device::Cpu;
        let mut trainer = VaeTrainer::new(&tiny_config(), 5, &dev, 1e-4).unwrap();
        let mut rng = TensorRng::new(11, &dev);
        let x = rng.randn(&[2, 2, 4800], 0.3).unwrap();
        let losses = trainer.step(&x, VaePhase::Warmup).unwrap();
        assert!(losses.total.is_finite());
        assert!(losses.spectral > 0.0);
        assert_eq!(losses.kl_weight, 1e-4);
        let losses = trainer.step(&x, VaePhase::AdversarialFinal).unwrap();
        assert_eq!(losses.kl_weight, 0.0);
        assert_eq!(losses.adv_weight, 0.5);
        assert!(losses.disc.is_finite());
    }
}
