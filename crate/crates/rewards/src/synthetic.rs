//! Synthetic alignment maps and a corruption ladder for validating AAS.

use crate::aas::ScoreMap;

/// Tiny deterministic generator (splitmix64) so this module needs no
/// external RNG.
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// A raw attention-score map where each token owns a flat high-score
/// frame block advancing linearly in time; `corruption` is the fraction
/// of tokens re-aimed at random frames.
pub fn corrupted_alignment_map(
    frames: usize,
    tokens: usize,
    corruption: f64,
    seed: u64,
) -> ScoreMap {
    let mut rng = SplitMix::new(seed);
    let half = (frames as f64 / tokens as f64 / 2.0).max(0.5);
    let centers: Vec<f64> = (0..tokens)
        .map(|j| {
            if rng.next_f64() < corruption {
                rng.below(frames) as f64
            } else {
                (j as f64 + 0.5) * frames as f64 / tokens as f64
            }
        })
        .collect();
    let mut data = vec![0f64; frames * tokens];
    for i in 0..frames {
        for (j, &c) in centers.iter().enumerate() {
            let inside = (i as f64 + 0.5 - c).abs() <= half;
            data[i * tokens + j] = if inside { 8.0 } else { -8.0 };
        }
    }
    ScoreMap { data, frames, tokens }
}

/// Token-shuffled variant of a perfect map: all centroids permuted.
pub fn shuffled_alignment_map(frames: usize, tokens: usize, seed: u64) -> ScoreMap {
    let mut rng = SplitMix::new(seed);
    let mut perm: Vec<usize> = (0..tokens).collect();
    for i in (1..tokens).rev() {
        let j = rng.below(i + 1);
        perm.swap(i, j);
    }
    let half = (frames as f64 / tokens as f64 / 2.0).max(0.5);
    let mut data = vec![0f64; frames * tokens];
    for i in 0..frames {
        for j in 0..tokens {
            let c = (perm[j] as f64 + 0.5) * frames as f64 / tokens as f64;
            let inside = (i as f64 + 0.5 - c).abs() <= half;
            data[i * tokens + j] = if inside { 8.0 } else { -8.0 };
        }
    }
    ScoreMap { data, frames, tokens }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aas::aas_single;

    #[test]
    fn clean_map_scores_near_one() {
        let m = corrupted_alignment_map(64, 16, 0.0, 1);
        let r = aas_single(&m);
        assert!(r.aas >= 0.99, "aas {}", r.aas);
    }

    #[test]
    fn full_corruption_scores_lower() {
        let clean = aas_single(&corrupted_alignment_map(64, 16, 0.0, 2)).aas;
        let broken = aas_single(&corrupted_alignment_map(64, 16, 1.0, 2)).aas;
        assert!(broken < clean - 0.2, "clean {clean} broken {broken}");
    }
}
