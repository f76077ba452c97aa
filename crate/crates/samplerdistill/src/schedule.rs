//! Timestep schedules with the shift reparameterization.

use crate::{Result, SamplerError};
use serde::{Deserialize, Serialize};

/// `t' = s*t / (1 + (s-1)*t)`: strictly increasing on [0,1], identity at
/// s=1, exact at both endpoints.
pub fn shift_map(t: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SamplerError::Domain(format!("t={t} outside [0,1]")));
    }
    if s < 1.0 {
        return Err(SamplerError::Domain(format!("shift={s} below 1")));
    }
    Ok(s * t / (1.0 + (s - 1.0) * t))
}

/// An integration grid from noise (t=0) to data (t=1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: usize,
    pub shift: f64,
    /// `steps + 1` strictly increasing times, exactly 0 and 1 at the ends.
    pub times: Vec<f64>,
}

pub fn make_schedule(steps: usize, shift: f64) -> Result<Schedule> {
    if steps < 1 {
        return Err(SamplerError::Domain("steps must be >= 1".into()));
    }
    let times: Vec<f64> = (0..=steps)
        .map(|k| shift_map(k as f64 / steps as f64, shift))
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule { steps, shift, times })
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.times.first() != Some(&0.0) || self.times.last() != Some(&1.0) {
            return Err(SamplerError::Domain("schedule endpoints must be exactly 0 and 1".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SamplerError::Domain("schedule times must be strictly increasing".into()));
        }
        Ok(())
    }
}
