//! Flow-matching ODE sampling with timestep shift and classifier-free
//! guidance, plus adversarial dynamic-shift distillation that compresses
//! the 50-step guided teacher into a 4-8 step guidance-free student.

pub mod bench;
pub mod distill;
pub mod fad;
pub mod sampler;
pub mod schedule;

pub use bench::{speed_benchmark, BenchReport, SamplerCfg};
pub use distill::{DistillConfig, DistillLosses, DistillState};
pub use fad::latent_frechet_distance;
pub use sampler::{euler_sample, SampleOutput};
pub use schedule::{make_schedule, shift_map, Schedule};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Dit(#[from] ditcore::DitError),
    #[error(transparent)]
    Codec(#[from] latentcodec::CodecError),
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
    #[error("domain: {0}")]
    Domain(String),
    #[error("non-finite state at sampler step {step}")]
    NonFiniteAtStep { step: usize },
}

pub type Result<T> = std::result::Result<T, SamplerError>;
