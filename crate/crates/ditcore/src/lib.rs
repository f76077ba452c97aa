//! Conditional diffusion transformer over codec latents.
//!
//! Hybrid attention (odd-indexed layers sliding-window, even-indexed global
//! GQA), per-layer cross-attention to a caption/timbre/lyric context with
//! exposed raw attention scores, Source/Noised/Mask input composition, a
//! patchify stage, and the masked flow-matching objective.

pub mod attn;
pub mod compose;
pub mod cond;
pub mod config;
pub mod flow;
pub mod model;
pub mod train;

pub use compose::{compose_input, compose_t, patchify, unpatchify};
pub use cond::{CaptionTokenizer, CondEncoders, CondInputs, ConditionBundle};
pub use config::DiTConfig;
pub use flow::{flow_perturb, flow_perturb_t, fm_loss, FlowBatch};
pub use model::{AttnMaps, DiT};
pub use train::DiTTrainer;

#[derive(Debug, thiserror::Error)]
pub enum DitError {
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
    #[error(transparent)]
    Codec(#[from] latentcodec::CodecError),
    #[error("shape: {0}")]
    Shape(String),
    #[error("contract: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, DitError>;
