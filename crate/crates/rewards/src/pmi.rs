//! Pointwise mutual information under a listener model.

use crate::{RewardError, Result};

/// A model that scores text likelihood, optionally conditioned on audio
/// codes. Implemented by the planner LM in listener mode.
pub trait Listener {
    /// Total log-probability of `text_tokens` under teacher forcing,
    /// conditioned on `codes` when given, otherwise on the null context.
    fn text_logprob(&self, text_tokens: &[u32], codes: Option<&[u32]>) -> Result<f64>;
}

/// PMI = log p(text | codes) - log p(text | null context).
///
/// Zero for a code-blind listener; positive when the codes make the text
/// more likely than a generic description.
pub fn pmi(listener: &dyn Listener, text_tokens: &[u32], codes: &[u32]) -> Result<f64> {
    if text_tokens.is_empty() {
        return Err(RewardError::Empty("text tokens".into()));
    }
    let conditional = listener.text_logprob(text_tokens, Some(codes))?;
    let unconditional = listener.text_logprob(text_tokens, None)?;
    Ok(conditional - unconditional)
}
