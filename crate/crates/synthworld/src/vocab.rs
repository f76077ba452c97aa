//! Closed 64-token pseudo-syllable vocabulary.
//!
//! Token `k` is a consonant-vowel syllable with a unique two-partial tone:
//! one partial from the low group and one from the high group. The pair is
//! unique per token, which makes lyric onsets exactly recoverable from audio
//! with per-token matched filters.

/// Number of lyric tokens in the closed vocabulary.
pub const VOCAB_SIZE: usize = 64;

const CONSONANTS: [&str; 8] = ["b", "d", "k", "l", "m", "n", "s", "t"];
const VOWELS: [&str; 8] = ["a", "e", "i", "o", "u", "ay", "oh", "oo"];

/// Low partial group base/step in Hz (8 frequencies, 1200..=1620).
const LOW_BASE: f64 = 1200.0;
/// High partial group base/step in Hz (8 frequencies, 1740..=2160).
const HIGH_BASE: f64 = 1740.0;
const PARTIAL_STEP: f64 = 60.0;

/// Syllable string for a token id.
pub fn syllable(token: u8) -> String {
    assert!((token as usize) < VOCAB_SIZE, "lyric token out of range");
    let c = CONSONANTS[(token / 8) as usize];
    let v = VOWELS[(token % 8) as usize];
    format!("{c}{v}")
}

/// Token id for a syllable string, if it belongs to the vocabulary.
pub fn token_of(syll: &str) -> Option<u8> {
    for t in 0..VOCAB_SIZE as u8 {
        if syllable(t) == syll {
            return Some(t);
        }
    }
    None
}

/// The unique `(low, high)` partial pair in Hz for a token.
pub fn partials(token: u8) -> (f64, f64) {
    assert!((token as usize) < VOCAB_SIZE, "lyric token out of range");
    let lo = LOW_BASE + PARTIAL_STEP * f64::from(token / 8);
    let hi = HIGH_BASE + PARTIAL_STEP * f64::from(token % 8);
    (lo, hi)
}

/// Frequency band (Hz) that contains every vocal partial and nothing else.
pub const VOCAL_BAND: (f64, f64) = (1150.0, 2250.0);

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn syllables_unique() {
        let all: HashSet<String> = (0..64).map(|t| syllable(t as u8)).collect();
        assert_eq!(all.len(), 64);
    }

    #[test]
    fn partial_pairs_unique_and_in_band() {
        let mut seen = HashSet::new();
        for t in 0..64u8 {
            let (lo, hi) = partials(t);
            assert!(lo < hi);
            assert!(lo >= VOCAL_BAND.0 && hi <= VOCAL_BAND.1, "token {t} out of band");
            assert!(seen.insert(((lo * 10.0) as u64, (hi * 10.0) as u64)));
        }
    }

    #[test]
    fn roundtrip_token_of() {
        for t in 0..64u8 {
            assert_eq!(token_of(&syllable(t)), Some(t));
        }
        assert_eq!(token_of("xy"), None);
    }
}
