//! Weighted reward aggregation and metadata adherence scoring.

use serde::{Deserialize, Serialize};

/// Aggregate weights: style 50%, lyric 30%, metadata 20%.
pub const WEIGHTS: (f64, f64, f64) = (0.5, 0.3, 0.2);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardBundle {
    pub style: f64,
    pub lyric: f64,
    pub metadata: f64,
    pub total: f64,
    pub weights: (f64, f64, f64),
    pub clamped: bool,
}

/// Convex combination of the three component scores. Components outside
/// [0,1] are clamped and flagged.
pub fn aggregate(style: f64, lyric: f64, metadata: f64) -> RewardBundle {
    let mut clamped = false;
    let mut clamp = |v: f64| -> f64 {
        if (0.0..=1.0).contains(&v) {
            v
        } else {
            clamped = true;
            v.clamp(0.0, 1.0)
        }
    };
    let style = clamp(style);
    let lyric = clamp(lyric);
    let metadata = clamp(metadata);
    let (ws, wl, wm) = WEIGHTS;
    RewardBundle {
        style,
        lyric,
        metadata,
        total: ws * style + wl * lyric + wm * metadata,
        weights: WEIGHTS,
        clamped,
    }
}

/// Plan-declared metadata targets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanFacts {
    pub bpm: f64,
    /// Pitch-class index 0-11 of the planned key.
    pub key_pc: u8,
    pub duration_s: f64,
}

/// Oracle measurements of the realized audio.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RealizedFacts {
    pub bpm: Option<f64>,
    pub tonic_hz: Option<f64>,
    pub duration_s: f64,
}

pub const BPM_TOL: f64 = 0.05;
pub const TONIC_TOL_SEMITONES: f64 = 1.0;
pub const DURATION_TOL: f64 = 0.02;

fn plan_tonic_hz(key_pc: u8) -> f64 {
    130.8128 * 2f64.powf(f64::from(key_pc) / 12.0)
}

/// Mean of indicator checks: bpm within 5%, tonic within one semitone,
/// duration within 2%.
pub fn metadata_score(plan: &PlanFacts, realized: &RealizedFacts) -> f64 {
    let mut score = 0.0;
    if let Some(bpm) = realized.bpm {
        if (bpm - plan.bpm).abs() <= BPM_TOL * plan.bpm {
            score += 1.0;
        }
    }
    if let Some(tonic) = realized.tonic_hz {
        let semis = 12.0 * (tonic / plan_tonic_hz(plan.key_pc)).log2().abs();
        if semis <= TONIC_TOL_SEMITONES {
            score += 1.0;
        }
    }
    if plan.duration_s > 0.0
        && (realized.duration_s - plan.duration_s).abs() <= DURATION_TOL * plan.duration_s
    {
        score += 1.0;
    }
    score / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_total_one() {
        let b = aggregate(1.0, 1.0, 1.0);
        assert_eq!(b.total, 1.0);
        assert!(!b.clamped);
    }

    #[test]
    fn style_alone_is_half() {
        let b = aggregate(1.0, 0.0, 0.0);
        assert_eq!(b.total, 0.5);
    }

    #[test]
    fn out_of_range_clamped_with_flag() {
        let b = aggregate(1.4, -0.2, 0.5);
        assert!(b.clamped);
        assert_eq!(b.style, 1.0);
        assert_eq!(b.lyric, 0.0);
    }

    #[test]
    fn bpm_within_5pct_passes() {
        let plan = PlanFacts { bpm: 120.0, key_pc: 0, duration_s: 16.0 };
        let realized = RealizedFacts {
            bpm: Some(118.0),
            tonic_hz: Some(plan_tonic_hz(0)),
            duration_s: 16.0,
        };
        assert_eq!(metadata_score(&plan, &realized), 1.0);
        let far = RealizedFacts { bpm: Some(100.0), ..realized };
        assert!((metadata_score(&plan, &far) - 2.0 / 3.0).abs() < 1e-12);
    }
}
