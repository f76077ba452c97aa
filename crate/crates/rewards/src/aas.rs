//! Attention Alignment Score: coverage, monotonicity, and DTW path
//! confidence over the consensus of bidirectional attention maps.

use crate::{RewardError, Result};
use serde::{Deserialize, Serialize};

/// Row-major frames x tokens score matrix (f64).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub data: Vec<f64>,
    pub frames: usize,
    pub tokens: usize,
}

impl ScoreMap {
    pub fn new(data: Vec<f64>, frames: usize, tokens: usize) -> Result<Self> {
        if frames == 0 || tokens == 0 || data.len() != frames * tokens {
            return Err(RewardError::Empty(format!(
                "score map {frames}x{tokens} with {} entries",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(RewardError::NonFinite("score map".into()));
        }
        Ok(Self { data, frames, tokens })
    }

    pub fn get(&self, frame: usize, token: usize) -> f64 {
        self.data[frame * self.tokens + token]
    }

    /// Head-averaged raw scores of one model layer.
    pub fn from_attn_layer(maps: &ditcore::AttnMaps, layer: usize) -> Result<Self> {
        Self::new(
            maps.layer(layer).iter().map(|&v| f64::from(v)).collect(),
            maps.frames,
            maps.tokens,
        )
    }

    /// Layer-mean raw scores of a full capture.
    pub fn from_attn_mean(maps: &ditcore::AttnMaps) -> Result<Self> {
        Self::new(
            maps.layer_mean().iter().map(|&v| f64::from(v)).collect(),
            maps.frames,
            maps.tokens,
        )
    }
}

fn softmax_rows(rows: usize, cols: usize, get: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0f64; rows * cols];
    for r in 0..rows {
        let mut max = f64::MIN;
        for c in 0..cols {
            max = max.max(get(r, c));
        }
        let mut sum = 0f64;
        for c in 0..cols {
            let e = (get(r, c) - max).exp();
            out[r * cols + c] = e;
            sum += e;
        }
        for c in 0..cols {
            out[r * cols + c] /= sum;
        }
    }
    out
}

/// From raw scores: frame-to-token map (softmax over tokens per frame),
/// token-to-frame map (softmax over frames per token), and their
/// element-wise geometric-mean consensus (frames x tokens).
pub fn bidirectional_maps(raw: &ScoreMap) -> (ScoreMap, ScoreMap, ScoreMap) {
    let (f, l) = (raw.frames, raw.tokens);
    let f2t = softmax_rows(f, l, |r, c| raw.get(r, c));
    let t2f = softmax_rows(l, f, |r, c| raw.get(c, r));
    let mut consensus = vec![0f64; f * l];
    for i in 0..f {
        for j in 0..l {
            consensus[i * l + j] = (f2t[i * l + j] * t2f[j * f + i]).sqrt();
        }
    }
    (
        ScoreMap { data: f2t, frames: f, tokens: l },
        ScoreMap { data: t2f, frames: l, tokens: f },
        ScoreMap { data: consensus, frames: f, tokens: l },
    )
}

/// Fraction of token rows whose peak reaches `kappa` times the uniform
/// attention level `1/frames`.
pub fn coverage(t2f: &ScoreMap, kappa: f64) -> f64 {
    let (l, f) = (t2f.frames, t2f.tokens);
    let thr = kappa / f as f64;
    let mut hit = 0usize;
    for token in 0..l {
        let row_max = (0..f).map(|i| t2f.get(token, i)).fold(f64::MIN, f64::max);
        if row_max >= thr {
            hit += 1;
        }
    }
    hit as f64 / l as f64
}

/// Default peak-significance multiple over the uniform level.
pub const COVERAGE_KAPPA: f64 = 3.0;

/// Fraction of adjacent token pairs whose attention centroids advance.
/// A single token scores 1.0 by convention.
pub fn monotonicity(t2f: &ScoreMap) -> f64 {
    let (l, f) = (t2f.frames, t2f.tokens);
    if l < 2 {
        return 1.0;
    }
    let centroid = |token: usize| -> f64 { (0..f).map(|i| i as f64 * t2f.get(token, i)).sum() };
    let mut forward = 0usize;
    let mut prev = centroid(0);
    for token in 1..l {
        let c = centroid(token);
        if c >= prev {
            forward += 1;
        }
        prev = c;
    }
    forward as f64 / (l - 1) as f64
}

/// Monotone DTW path maximizing summed consensus, moves
/// {(1,0),(0,1),(1,1)} from (0,0) to (F-1,L-1).
///
/// Diagonal moves use the standard symmetric step weight (2x): they
/// advance both axes, so without the weight the optimum would always pad
/// itself with near-zero cells and dilute the path mean.
pub fn dtw_path(consensus: &ScoreMap) -> Vec<(usize, usize)> {
    let (f, l) = (consensus.frames, consensus.tokens);
    let neg = f64::NEG_INFINITY;
    let mut score = vec![neg; f * l];
    // 0 = start, 1 = from (i-1,j), 2 = from (i,j-1), 3 = from (i-1,j-1)
    let mut from = vec![0u8; f * l];
    for i in 0..f {
        for j in 0..l {
            let idx = i * l + j;
            if i == 0 && j == 0 {
                score[idx] = 2.0 * consensus.get(0, 0);
                continue;
            }
            let mut best = neg;
            let mut arg = 0u8;
            let here = consensus.get(i, j);
            if i > 0 && j > 0 && score[(i - 1) * l + (j - 1)] + 2.0 * here > best {
                best = score[(i - 1) * l + (j - 1)] + 2.0 * here;
                arg = 3;
            }
            if i > 0 && score[(i - 1) * l + j] + here > best {
                best = score[(i - 1) * l + j] + here;
                arg = 1;
            }
            if j > 0 && score[i * l + (j - 1)] + here > best {
                best = score[i * l + (j - 1)] + here;
                arg = 2;
            }
            score[idx] = best;
            from[idx] = arg;
        }
    }
    let mut path = Vec::with_capacity(f + l);
    let (mut i, mut j) = (f - 1, l - 1);
    loop {
        path.push((i, j));
        match from[i * l + j] {
            0 => break,
            1 => i -= 1,
            2 => j -= 1,
            _ => {
                i -= 1;
                j -= 1;
            }
        }
    }
    path.reverse();
    path
}

/// Weighted DTW objective of a path (diagonal moves count twice).
pub fn path_weighted_sum(consensus: &ScoreMap, path: &[(usize, usize)]) -> f64 {
    let mut total = 2.0 * consensus.get(path[0].0, path[0].1);
    for w in path.windows(2) {
        let (pi, pj) = w[0];
        let (i, j) = w[1];
        let weight = if i > pi && j > pj { 2.0 } else { 1.0 };
        total += weight * consensus.get(i, j);
    }
    total
}

/// Brute-force enumeration of the weighted DTW optimum (test oracle;
/// exponential, keep matrices small).
pub fn brute_force_best(c: &ScoreMap) -> f64 {
    fn recurse(c: &ScoreMap, i: usize, j: usize, w: f64) -> f64 {
        let here = w * c.get(i, j);
        if i == c.frames - 1 && j == c.tokens - 1 {
            return here;
        }
        let mut best = f64::NEG_INFINITY;
        if i + 1 < c.frames {
            best = best.max(recurse(c, i + 1, j, 1.0));
        }
        if j + 1 < c.tokens {
            best = best.max(recurse(c, i, j + 1, 1.0));
        }
        if i + 1 < c.frames && j + 1 < c.tokens {
            best = best.max(recurse(c, i + 1, j + 1, 2.0));
        }
        here + best
    }
    recurse(c, 0, 0, 2.0)
}

/// Mean consensus along the path, normalized by the matrix maximum.
/// Returns (confidence, flags).
pub fn path_confidence(consensus: &ScoreMap, path: &[(usize, usize)]) -> (f64, Vec<String>) {
    let mut flags = Vec::new();
    let max = consensus.data.iter().cloned().fold(f64::MIN, f64::max);
    if max <= 0.0 {
        flags.push("degenerate-input".into());
        return (0.0, flags);
    }
    let mean = consensus.data.iter().sum::<f64>() / consensus.data.len() as f64;
    let var = consensus.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / consensus.data.len() as f64;
    if var < 1e-9 {
        flags.push("uninformative".into());
    }
    let along: f64 = path.iter().map(|&(i, j)| consensus.get(i, j)).sum();
    ((along / path.len() as f64) / max, flags)
}

/// Decomposed attention-alignment score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AasReport {
    pub coverage: f64,
    pub monotonicity: f64,
    pub path_confidence: f64,
    pub aas: f64,
    pub per_layer: Option<Vec<f64>>,
    pub dtw_path: Vec<(usize, usize)>,
    pub flags: Vec<String>,
}

fn aas_of_map(raw: &ScoreMap) -> (f64, f64, f64, Vec<(usize, usize)>, Vec<String>) {
    let (_f2t, t2f, consensus) = bidirectional_maps(raw);
    let cov = coverage(&t2f, COVERAGE_KAPPA);
    let mono = monotonicity(&t2f);
    let path = dtw_path(&consensus);
    let (conf, flags) = path_confidence(&consensus, &path);
    (cov, mono, conf, path, flags)
}

/// Full AAS over captured attention maps: components on the layer-averaged
/// raw scores, per-layer aggregate scores exposed for diagnostics.
pub fn aas(maps: &ditcore::AttnMaps, lyric_len: usize) -> Result<AasReport> {
    if maps.n_layers() == 0 {
        return Err(RewardError::Empty("attention maps".into()));
    }
    if maps.tokens != lyric_len {
        return Err(RewardError::Empty(format!(
            "map tokens {} != lyric_len {lyric_len}",
            maps.tokens
        )));
    }
    let mean = ScoreMap::from_attn_mean(maps)?;
    let (cov, mono, conf, path, mut flags) = aas_of_map(&mean);
    if lyric_len == 1 {
        flags.push("single-token".into());
    }
    let mut per_layer = Vec::with_capacity(maps.n_layers());
    for layer in 0..maps.n_layers() {
        let m = ScoreMap::from_attn_layer(maps, layer)?;
        let (c, mo, pc, _, _) = aas_of_map(&m);
        per_layer.push((c + mo + pc) / 3.0);
    }
    Ok(AasReport {
        coverage: cov,
        monotonicity: mono,
        path_confidence: conf,
        aas: (cov + mono + conf) / 3.0,
        per_layer: Some(per_layer),
        dtw_path: path,
        flags,
    })
}

/// AAS on one raw score matrix (no layer structure).
pub fn aas_single(raw: &ScoreMap) -> AasReport {
    let (cov, mono, conf, path, mut flags) = aas_of_map(raw);
    if raw.tokens == 1 {
        flags.push("single-token".into());
    }
    AasReport {
        coverage: cov,
        monotonicity: mono,
        path_confidence: conf,
        aas: (cov + mono + conf) / 3.0,
        per_layer: None,
        dtw_path: path,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_diag(n: usize, hi: f64) -> ScoreMap {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = hi;
        }
        ScoreMap::new(data, n, n).unwrap()
    }

    #[test]
    fn single_cell_maps_are_one() {
        let raw = ScoreMap::new(vec![0.7], 1, 1).unwrap();
        let (f2t, t2f, c) = bidirectional_maps(&raw);
        assert_eq!(f2t.data, vec![1.0]);
        assert_eq!(t2f.data, vec![1.0]);
        assert!((c.data[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f2t_rows_sum_to_one() {
        let raw = ScoreMap::new((0..12).map(|i| i as f64 * 0.3).collect(), 3, 4).unwrap();
        let (f2t, t2f, _) = bidirectional_maps(&raw);
        for r in 0..3 {
            let s: f64 = (0..4).map(|c| f2t.get(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        for r in 0..4 {
            let s: f64 = (0..3).map(|c| t2f.get(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn diagonal_dominant_consensus_peaks_on_diagonal() {
        let n = 6;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 5.0 } else { 0.0 };
            }
        }
        let raw = ScoreMap::new(data, n, n).unwrap();
        let (_, _, c) = bidirectional_maps(&raw);
        for i in 0..n {
            let row_argmax = (0..n)
                .max_by(|&a, &b| c.get(i, a).partial_cmp(&c.get(i, b)).unwrap())
                .unwrap();
            assert_eq!(row_argmax, i);
        }
    }

    #[test]
    fn coverage_anchors() {
        // one-hot rows -> 1.0; uniform -> 0.0 for kappa > 1.
        let n = 8;
        let onehot = {
            let mut d = vec![0.0; n * n];
            for t in 0..n {
                d[t * n + (t % n)] = 1.0;
            }
            ScoreMap { data: d, frames: n, tokens: n }
        };
        assert_eq!(coverage(&onehot, 3.0), 1.0);
        let uniform = ScoreMap { data: vec![1.0 / n as f64; n * n], frames: n, tokens: n };
        assert_eq!(coverage(&uniform, 3.0), 0.0);
        // half one-hot, half uniform -> 0.5
        let mut d = vec![0.0; n * n];
        for t in 0..n / 2 {
            d[t * n + t] = 1.0;
        }
        for t in n / 2..n {
            for i in 0..n {
                d[t * n + i] = 1.0 / n as f64;
            }
        }
        let half = ScoreMap { data: d, frames: n, tokens: n };
        assert_eq!(coverage(&half, 3.0), 0.5);
    }

    #[test]
    fn monotonicity_anchors() {
        let n = 10;
        // strictly advancing one-hot t2f rows
        let mut d = vec![0.0; n * n];
        for t in 0..n {
            d[t * n + t] = 1.0;
        }
        let adv = ScoreMap { data: d.clone(), frames: n, tokens: n };
        assert_eq!(monotonicity(&adv), 1.0);
        // reversed
        let mut r = vec![0.0; n * n];
        for t in 0..n {
            r[t * n + (n - 1 - t)] = 1.0;
        }
        let rev = ScoreMap { data: r, frames: n, tokens: n };
        assert_eq!(monotonicity(&rev), 0.0);
        // one inversion among 9 steps -> 8/9 (swap tokens 4 and 5 targets)
        let mut o = vec![0.0; n * n];
        for t in 0..n {
            let target = match t {
                4 => 5,
                5 => 4,
                other => other,
            };
            o[t * n + target] = 1.0;
        }
        let one_inv = ScoreMap { data: o, frames: n, tokens: n };
        let got = monotonicity(&one_inv);
        // centroids: ...,3,5,4,6,... -> exactly one backward step among 9
        assert!((got - 8.0 / 9.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn dtw_identity_diagonal() {
        let c = one_hot_diag(5, 1.0);
        let path = dtw_path(&c);
        assert_eq!(path, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
        let (conf, flags) = path_confidence(&c, &path);
        assert!((conf - 1.0).abs() < 1e-12);
        assert!(flags.is_empty());
    }

    #[test]
    fn uniform_confidence_flagged_uninformative() {
        let c = ScoreMap { data: vec![0.25; 9], frames: 3, tokens: 3 };
        let path = dtw_path(&c);
        let (conf, flags) = path_confidence(&c, &path);
        assert!((conf - 1.0).abs() < 1e-12);
        assert!(flags.iter().any(|f| f == "uninformative"));
    }

    #[test]
    fn all_zero_confidence_degenerate() {
        let c = ScoreMap { data: vec![0.0; 9], frames: 3, tokens: 3 };
        let path = dtw_path(&c);
        let (conf, flags) = path_confidence(&c, &path);
        assert_eq!(conf, 0.0);
        assert!(flags.iter().any(|f| f == "degenerate-input"));
    }

    #[test]
    fn dtw_matches_brute_force_3x3() {
        let c = ScoreMap::new(
            vec![0.9, 0.1, 0.0, 0.2, 0.1, 0.8, 0.1, 0.9, 0.3],
            3,
            3,
        )
        .unwrap();
        let path = dtw_path(&c);
        let got = crate::aas::path_weighted_sum(&c, &path);
        assert!((got - crate::aas::brute_force_best(&c)).abs() < 1e-12);
    }

    #[test]
    fn perfect_alignment_scores_high() {
        // Sharp diagonal raw scores on a 32x32 grid.
        let n = 32;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 10.0 } else { -10.0 };
            }
        }
        let raw = ScoreMap::new(data, n, n).unwrap();
        let report = aas_single(&raw);
        assert!(report.aas >= 0.99, "aas {}", report.aas);
    }

    #[test]
    fn single_token_convention() {
        let raw = ScoreMap::new(vec![1.0, 2.0, 0.5], 3, 1).unwrap();
        let report = aas_single(&raw);
        assert_eq!(report.monotonicity, 1.0);
        assert!(report.flags.iter().any(|f| f == "single-token"));
    }
}
