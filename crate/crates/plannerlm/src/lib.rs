//! The planner language model: a small decoder-only transformer over a
//! joint text + audio-code vocabulary, driving four interaction modes
//! (planner, listener, co-pilot, refiner) with ChatML-style prompts and a
//! structured plan block ahead of content. Trained by SFT and aligned
//! with GRPO against intrinsic rewards.

pub mod grpo;
pub mod model;
pub mod plan;
pub mod reward;
pub mod sft;
pub mod template;
pub mod vocab;

pub use grpo::{grpo_step, GrpoConfig, GrpoStats};
pub use model::{LmConfig, LmModel};
pub use plan::{parse_plan, PlanError, PlanYaml};
pub use reward::{composer_listener_reward, CodeOracle, LmListener, PmiCalibration};
pub use sft::{sft_step, SftBatch, SftExample};
pub use template::{format_prompt, Mode, PromptInputs};
pub use vocab::JointVocab;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
    #[error("vocab: {0}")]
    Vocab(String),
    #[error("template: {0}")]
    Template(String),
    #[error("context overflow: {0} tokens > {1}")]
    ContextOverflow(usize, usize),
    #[error("grpo: {0}")]
    Grpo(String),
    #[error(transparent)]
    Plan(#[from] plan::PlanError),
    #[error(transparent)]
    Reward(#[from] rewards::RewardError),
}

pub type Result<T> = std::result::Result<T, LmError>;
