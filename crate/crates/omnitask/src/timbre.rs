//! Timbre reference construction: stem segments concatenated and
//! loop-padded or truncated to a fixed 30-second context window.

use crate::{Result, TaskError};
use latentcodec::{LatentSeq, Vae};
use nnkit::TensorRng;
use synthworld::render::{Stereo, SAMPLE_RATE};
use synthworld::spec::Instrument;
use std::collections::BTreeMap;

/// Fixed reference window length in seconds.
pub const REF_WINDOW_S: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct RefWindow {
    pub wave: Stereo,
    pub sample_rate: u32,
    /// Which stems fed the window.
    pub stems: Vec<Instrument>,
}

fn stem_rms(wave: &Stereo) -> f64 {
    let n = wave[0].len().max(1);
    let sum: f64 = wave
        .iter()
        .flat_map(|ch| ch.iter())
        .map(|&v| f64::from(v) * f64::from(v))
        .sum();
    (sum / (2 * n) as f64).sqrt()
}

/// Concatenates seeded non-silent stem segments into a continuous stream,
/// then loop-pads (repeats) or truncates to exactly 30 s.
pub fn build_timbre_reference(
    stems: &BTreeMap<Instrument, Stereo>,
    rng: &mut TensorRng,
) -> Result<RefWindow> {
    let non_silent: Vec<(&Instrument, &Stereo)> =
        stems.iter().filter(|(_, w)| stem_rms(w) > 1e-6).collect();
    if non_silent.is_empty() {
        return Err(TaskError::SilentStems);
    }
    // One or two seeded stems keep the timbre signature clean.
    let take = 1 + usize::from(non_silent.len() > 1 && rng.gen_bool(0.3));
    let mut picked = Vec::new();
    let mut order: Vec<usize> = (0..non_silent.len()).collect();
    for i in 0..take {
        let j = i + rng.gen_range(0..order.len() - i);
        order.swap(i, j);
        picked.push(order[i]);
    }

    let target = (REF_WINDOW_S * f64::from(SAMPLE_RATE)) as usize;
    let mut stream: Stereo = [Vec::new(), Vec::new()];
    let mut used = Vec::new();
    for &idx in &picked {
        let (instr, wave) = non_silent[idx];
        used.push(*instr);
        for ch in 0..2 {
            stream[ch].extend_from_slice(&wave[ch]);
        }
    }
    if stream[0].is_empty() {
        return Err(TaskError::SilentStems);
    }
    // Loop padding: repeat the stream until the window is full.
    let mut window: Stereo = [Vec::with_capacity(target), Vec::with_capacity(target)];
    let len = stream[0].len();
    for i in 0..target {
        let src = i % len;
        window[0].push(stream[0][src]);
        window[1].push(stream[1][src]);
    }
    Ok(RefWindow { wave: window, sample_rate: SAMPLE_RATE, stems: used })
}

/// Codec-encodes the reference window and mean-pools the 25 Hz latent to
/// 5 Hz, the rate the timbre encoder consumes.
pub fn timbre_latent_5hz(vae: &Vae, window: &RefWindow) -> Result<LatentSeq> {
    let latent = vae.encode_wave(&window.wave[0], &window.wave[1])?;
    let group = 5usize;
    let t_out = latent.t / group;
    let mut frames = vec![0f32; t_out * latent.dim];
    for g in 0..t_out {
        for d in 0..latent.dim {
            let mut acc = 0f32;
            for k in 0..group {
                acc += latent.get(g * group + k, d);
            }
            frames[g * latent.dim + d] = acc / group as f32;
        }
    }
    Ok(LatentSeq { frames, t: t_out, dim: latent.dim, rate_hz: latent.rate_hz / group as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn stems_with(len: usize, silent_vocal: bool) -> BTreeMap<Instrument, Stereo> {
        let mut m = BTreeMap::new();
        for instr in Instrument::ALL {
            let silent = silent_vocal && instr == Instrument::Vocal;
            let wave: Stereo = if silent {
                [vec![0.0; len], vec![0.0; len]]
            } else {
                [
                    (0..len).map(|i| ((i as f32) * 0.01).sin() * 0.3).collect(),
                    (0..len).map(|i| ((i as f32) * 0.02).sin() * 0.3).collect(),
                ]
            };
            m.insert(instr, wave);
        }
        m
    }

    #[test]
    fn short_material_is_loop_padded() {
        // 12 s of material -> repeated to exactly 30 s.
        let dev = Device::Cpu;
        let stems = stems_with(12 * 4800, false);
        let mut rng = TensorRng::new(0, &dev);
        let w = build_timbre_reference(&stems, &mut rng).unwrap();
        assert_eq!(w.wave[0].len(), 144_000);
        let len = 12 * 4800;
        for i in 0..100 {
            assert_eq!(w.wave[0][i], w.wave[0][i + len]);
        }
    }

    #[test]
    fn long_material_is_truncated() {
        let dev = Device::Cpu;
        let stems = stems_with(45 * 4800, false);
        let mut rng = TensorRng::new(1, &dev);
        let w = build_timbre_reference(&stems, &mut rng).unwrap();
        assert_eq!(w.wave[0].len(), 144_000);
    }

    #[test]
    fn silent_stems_error() {
        let dev = Device::Cpu;
        let mut stems = BTreeMap::new();
        stems.insert(Instrument::Kick, [vec![0.0; 4800], vec![0.0; 4800]]);
        let mut rng = TensorRng::new(2, &dev);
        assert!(matches!(build_timbre_reference(&stems, &mut rng), Err(TaskError::SilentStems)));
    }
}
