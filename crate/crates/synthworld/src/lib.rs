//! Deterministic synthetic music world.
//!
//! Generates symbolic song specifications, renders them to multi-stem
//! waveforms with exact lyric-time alignment, produces templated captions,
//! and provides closed-form signal oracles (tempo, tonic, alignment) that
//! recover the ground truth from audio alone. Every operation is a pure
//! function of its seed and inputs.

pub mod caption;
pub mod dataset;
pub mod filter;
pub mod oracle;
pub mod render;
pub mod spec;
pub mod vocab;
pub mod wav;

pub use caption::{caption, sparsify, Caption, SparsityLevel};
pub use dataset::{build_dataset, DatasetManifest, ManifestRecord};
pub use filter::{filter_pair, FilterReport};
pub use oracle::{analyze_tempo, analyze_tonic, detect_alignment};
pub use render::{render, RenderedSong};
pub use spec::{make_spec, Instrument, SectionLabel, SongSpec, SpecConstraints};

/// Errors produced by the synthetic world.
#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{field} out of range: {detail}")]
    ConstraintOutOfRange { field: String, detail: String },
    #[error("no-signal: input waveform is silent")]
    NoSignal,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unknown sparsity level: {0}")]
    UnknownLevel(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("wav: {0}")]
    Wav(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Mixes a 64-bit stream seed with an item index, giving one independent
/// sub-seed per item (splitmix64 finalizer).
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
