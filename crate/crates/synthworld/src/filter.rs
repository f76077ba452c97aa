//! Audio-text correlation filter: oracle-confirmed caption claims.

use crate::caption::Caption;
use crate::oracle;
use crate::render::RenderedSong;
use crate::spec::tonic_hz;
use serde::{Deserialize, Serialize};

/// Default keep threshold on the confirmed-claim fraction.
pub const KEEP_THRESHOLD: f64 = 0.8;

/// Claim tolerance for bpm (relative) and tonic (semitones).
pub const BPM_CLAIM_TOL: f64 = 0.05;
pub const TONIC_CLAIM_TOL_SEMITONES: f64 = 1.0;

/// Absolute band-RMS floors for instrument presence, calibrated to sit in
/// the gap between rendered level and cross-band leakage.
fn presence_floor(name: &str) -> f64 {
    match name {
        "kick" => 0.02,
        "bass" => 0.03,
        "lead" => 0.015,
        "pad" => 0.01,
        "vocal" => 0.015,
        _ => f64::INFINITY,
    }
}

fn band_of(name: &str) -> Option<(f64, f64)> {
    match name {
        "kick" => Some(oracle::BAND_KICK),
        "bass" => Some(oracle::BAND_BASS),
        "lead" => Some(oracle::BAND_LEAD),
        "pad" => Some(oracle::BAND_PAD),
        "vocal" => Some(crate::vocab::VOCAL_BAND),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterReport {
    pub keep: bool,
    pub score: f64,
    pub claims: usize,
    pub confirmed: usize,
}

/// Scores a (song, caption) pair: the fraction of caption claims confirmed
/// by the oracles. `keep` applies the default 0.8 threshold.
pub fn filter_pair(song: &RenderedSong, cap: &Caption) -> FilterReport {
    let mono = song.mono();
    let mut claims = 0usize;
    let mut confirmed = 0usize;

    if let Some(bpm) = cap.claimed_bpm {
        claims += 1;
        if let Ok(est) = oracle::analyze_tempo(&mono) {
            if (est - f64::from(bpm)).abs() <= BPM_CLAIM_TOL * f64::from(bpm) {
                confirmed += 1;
            }
        }
    }
    if let Some(pc) = cap.claimed_key_pc {
        claims += 1;
        if let Ok(est) = oracle::analyze_tonic(&mono) {
            let semis = 12.0 * (est / tonic_hz(pc)).log2().abs();
            if semis <= TONIC_CLAIM_TOL_SEMITONES {
                confirmed += 1;
            }
        }
    }
    for name in &cap.claimed_instruments {
        claims += 1;
        if let Some(band) = band_of(name) {
            let rms = oracle::band_power(&mono, band).sqrt();
            if rms >= presence_floor(name) {
                confirmed += 1;
            }
        }
    }

    let score = if claims == 0 { 0.0 } else { confirmed as f64 / claims as f64 };
    FilterReport { keep: claims > 0 && score >= KEEP_THRESHOLD, score, claims, confirmed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caption::caption;
    use crate::render::render;
    use crate::spec::{make_spec, SpecConstraints};

    #[test]
    fn matched_pair_scores_one() {
        for seed in [0u64, 3, 9] {
            let spec = make_spec(seed, &SpecConstraints::default()).unwrap();
            let song = render(&spec);
            let rep = filter_pair(&song, &caption(&spec));
            assert_eq!(rep.score, 1.0, "seed {seed}: {rep:?}");
            assert!(rep.keep);
        }
    }

    #[test]
    fn wrong_bpm_claim_drops_score() {
        let spec = make_spec(
            4,
            &SpecConstraints { bpm: Some(100), ..Default::default() },
        )
        .unwrap();
        let song = render(&spec);
        let mut cap = caption(&spec);
        // Falsify the bpm claim and trim to 3 claims total.
        cap.claimed_bpm = Some(160);
        cap.claimed_instruments.truncate(1);
        let rep = filter_pair(&song, &cap);
        assert_eq!(rep.claims, 3);
        assert!((rep.score - 2.0 / 3.0).abs() < 1e-9, "{rep:?}");
        assert!(!rep.keep);
    }

    #[test]
    fn silent_song_not_kept() {
        let spec = make_spec(5, &SpecConstraints::default()).unwrap();
        let mut song = render(&spec);
        for ch in song.mix.iter_mut() {
            ch.iter_mut().for_each(|v| *v = 0.0);
        }
        let rep = filter_pair(&song, &caption(&spec));
        assert!(!rep.keep);
        assert_eq!(rep.score, 0.0);
    }
}
