//! Repaint splice: masked merge with a linear crossfade at mask edges.

use crate::{Result, TaskError};
use latentcodec::LatentSeq;

/// Default crossfade width in latent frames (~160 ms at 25 Hz).
pub const CROSSFADE_FRAMES: usize = 4;

/// `mask * output + (1 - mask) * source`, with a linear crossfade of
/// `crossfade` frames ramping inside each masked run. Frames outside the
/// mask are bit-exact copies of the source.
pub fn splice_repaint(
    output: &LatentSeq,
    source: &LatentSeq,
    mask: &[f32],
    crossfade: usize,
) -> Result<LatentSeq> {
    if output.t != source.t || output.t != mask.len() || output.dim != source.dim {
        return Err(TaskError::LengthMismatch(format!(
            "output {}x{} source {}x{} mask {}",
            output.t,
            output.dim,
            source.t,
            source.dim,
            mask.len()
        )));
    }
    let t = output.t;
    let mut weight: Vec<f32> = mask.to_vec();
    if crossfade > 0 {
        // Ramp weights inside each masked run, at both ends.
        let mut i = 0;
        while i < t {
            if mask[i] == 1.0 {
                let start = i;
                while i < t && mask[i] == 1.0 {
                    i += 1;
                }
                let end = i; // run is [start, end)
                for k in 0..crossfade.min(end - start) {
                    let ramp = (k + 1) as f32 / (crossfade + 1) as f32;
                    if start > 0 {
                        weight[start + k] = weight[start + k].min(ramp);
                    }
                    if end < t {
                        weight[end - 1 - k] = weight[end - 1 - k].min(ramp);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
    let mut frames = vec![0f32; t * output.dim];
    for i in 0..t {
        let w = weight[i];
        for d in 0..output.dim {
            let idx = i * output.dim + d;
            frames[idx] = if w == 0.0 {
                source.frames[idx]
            } else if w == 1.0 {
                output.frames[idx]
            } else {
                w * output.frames[idx] + (1.0 - w) * source.frames[idx]
            };
        }
    }
    Ok(LatentSeq { frames, t, dim: output.dim, rate_hz: output.rate_hz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nnkit::TensorRng;

    fn random_latent(seed: u64, t: usize) -> LatentSeq {
        let dev = candle_core::Device::Cpu;
        let mut rng = TensorRng::new(seed, &dev);
        LatentSeq::from_tensor(&rng.randn(&[t, 64], 1.0).unwrap(), 25.0).unwrap()
    }

    #[test]
    fn all_zero_mask_returns_source_exactly() {
        let output = random_latent(0, 50);
        let source = random_latent(1, 50);
        let mask = vec![0.0; 50];
        let out = splice_repaint(&output, &source, &mask, 4).unwrap();
        assert_eq!(out.frames, source.frames);
        let out0 = splice_repaint(&output, &source, &mask, 0).unwrap();
        assert_eq!(out0.frames, source.frames);
    }

    #[test]
    fn all_one_mask_returns_output() {
        let output = random_latent(2, 50);
        let source = random_latent(3, 50);
        let mask = vec![1.0; 50];
        // Interior runs touching both ends of the sequence have no
        // adjacent source to fade into at the boundary ends.
        let out = splice_repaint(&output, &source, &mask, 0).unwrap();
        assert_eq!(out.frames, output.frames);
    }

    #[test]
    fn segment_splice_preserves_outside_exactly() {
        let output = random_latent(4, 400);
        let source = random_latent(5, 400);
        let mut mask = vec![0.0; 400];
        mask[100..200].iter_mut().for_each(|m| *m = 1.0);
        let out = splice_repaint(&output, &source, &mask, 0).unwrap();
        for i in 0..100 {
            assert_eq!(out.row(i), source.row(i), "frame {i}");
        }
        for i in 200..400 {
            assert_eq!(out.row(i), source.row(i), "frame {i}");
        }
        for i in 100..200 {
            assert_eq!(out.row(i), output.row(i), "frame {i}");
        }
        // With crossfade, unmasked frames stay bit-exact.
        let faded = splice_repaint(&output, &source, &mask, 4).unwrap();
        for i in 0..100 {
            assert_eq!(faded.row(i), source.row(i));
        }
        for i in 200..400 {
            assert_eq!(faded.row(i), source.row(i));
        }
        // Ramp frames blend.
        assert_ne!(faded.row(100), output.row(100));
        assert_eq!(faded.row(150), output.row(150));
    }

    #[test]
    fn idempotent_with_zero_crossfade() {
        let output = random_latent(6, 120);
        let source = random_latent(7, 120);
        let mut mask = vec![0.0; 120];
        mask[30..70].iter_mut().for_each(|m| *m = 1.0);
        let once = splice_repaint(&output, &source, &mask, 0).unwrap();
        let twice = splice_repaint(&once, &source, &mask, 0).unwrap();
        assert_eq!(once.frames, twice.frames);
    }
}
