//! Constructors for the six masked-framework task modalities, timbre
//! reference windows with loop padding, and the repaint splice.

pub mod splice;
pub mod task;
pub mod timbre;

pub use splice::splice_repaint;
pub use task::{build_task, sample_kind, TaskContext, TaskKind, TaskMeta, TaskSample};
pub use timbre::{build_timbre_reference, timbre_latent_5hz, RefWindow};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("missing stems: {0}")]
    MissingStems(String),
    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),
    #[error("all stems silent")]
    SilentStems,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Codec(#[from] latentcodec::CodecError),
    #[error(transparent)]
    Dit(#[from] ditcore::DitError),
}

pub type Result<T> = std::result::Result<T, TaskError>;
