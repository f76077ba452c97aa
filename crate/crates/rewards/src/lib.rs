//! Intrinsic reward computation.
//!
//! The attention alignment score (AAS) aggregates coverage, monotonicity
//! and DTW path confidence over bidirectional cross-attention maps; PMI
//! measures semantic adherence of text to audio codes under a listener
//! model; the weighted aggregate (style 50%, lyric 30%, metadata 20%)
//! drives best-of-N reranking and GRPO.

pub mod aas;
pub mod aggregate;
pub mod pmi;
pub mod rerank;
pub mod stats;
pub mod synthetic;

pub use aas::{
    aas, bidirectional_maps, coverage, dtw_path, monotonicity, path_confidence, AasReport,
    ScoreMap,
};
pub use aggregate::{aggregate, metadata_score, PlanFacts, RealizedFacts, RewardBundle};
pub use pmi::{pmi, Listener};
pub use rerank::rerank_best_of_n;
pub use stats::spearman;

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("non-finite input in {0}")]
    NonFinite(String),
    #[error("listener: {0}")]
    Listener(String),
}

pub type Result<T> = std::result::Result<T, RewardError>;
