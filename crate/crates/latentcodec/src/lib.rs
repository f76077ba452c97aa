//! Latent codec: a waveform-domain 1D variational autoencoder producing
//! 64-dimensional latents at 25 Hz, and the FSQ structural tokenizer that
//! pools them to 5 Hz discrete codes (implicit codebook of 64000) and
//! reconstructs a coarse Source Latent from those codes.

pub mod container;
pub mod fsq;
pub mod types;
pub mod vae;

pub use fsq::{FsqCodes, FsqTokenizer};
pub use types::{CodecConfig, LatentSeq};
pub use vae::{Vae, VaeLosses, VaePhase, VaeTrainer, WaveDiscriminator};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
    #[error("wave length {0} not divisible by {1} (enable pad_input or fix the length)")]
    NonDivisibleLength(usize, usize),
    #[error("internal invariant: {0}")]
    Invariant(String),
    #[error("non-finite {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, CodecError>;
