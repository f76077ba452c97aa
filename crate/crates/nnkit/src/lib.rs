//! Shared neural-network utilities built on candle.
//!
//! Everything here is deterministic: all randomness flows through a
//! ChaCha-seeded [`TensorRng`], never the device RNG.

pub mod checkpoint;
pub mod opt;
pub mod params;
pub mod rng;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use opt::AdamW;
pub use params::{Builder, Params};
pub use rng::TensorRng;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Fails fast when a scalar loss goes non-finite.
pub fn ensure_finite(name: &str, value: f32) -> Result<f32> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NnError::NonFinite(name.to_string()))
    }
}
