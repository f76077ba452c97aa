//! The six task constructors of the masked generative framework.

use crate::timbre::{build_timbre_reference, timbre_latent_5hz};
use crate::{Result, TaskError};
use ditcore::{CaptionTokenizer, CondInputs};
use latentcodec::{FsqTokenizer, LatentSeq, Vae};
use nnkit::TensorRng;
use serde::{Deserialize, Serialize};
use synthworld::caption::{caption, sparsify, SparsityLevel};
use synthworld::render::{mono_of, RenderedSong, Stereo};
use synthworld::spec::{all_style_tags, Instrument, SongSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    TextToMusic,
    Cover,
    Repaint,
    Extract,
    Layer,
    Complete,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::TextToMusic,
        TaskKind::Cover,
        TaskKind::Repaint,
        TaskKind::Extract,
        TaskKind::Layer,
        TaskKind::Complete,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::TextToMusic => "texttomusic",
            TaskKind::Cover => "cover",
            TaskKind::Repaint => "repaint",
            TaskKind::Extract => "extract",
            TaskKind::Layer => "layer",
            TaskKind::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskMeta {
    pub song_id: u64,
    pub kind: TaskKind,
    /// Masked segment bounds for repaint (frame indices).
    pub segment: Option<(usize, usize)>,
    /// Stems involved (extract target, layer addition, complete source).
    pub stems: Vec<String>,
}

/// One training example of the masked framework.
#[derive(Debug, Clone)]
pub struct TaskSample {
    pub kind: TaskKind,
    pub source: LatentSeq,
    pub mask: Vec<f32>,
    pub target: LatentSeq,
    pub cond: CondInputs,
    pub meta: TaskMeta,
}

impl TaskSample {
    pub fn validate(&self) -> Result<()> {
        if self.source.t != self.target.t || self.source.t != self.mask.len() {
            return Err(TaskError::LengthMismatch(format!(
                "source {} target {} mask {}",
                self.source.t,
                self.target.t,
                self.mask.len()
            )));
        }
        if self.kind == TaskKind::Repaint {
            for i in 0..self.mask.len() {
                if self.mask[i] == 0.0 && self.source.row(i) != self.target.row(i) {
                    return Err(TaskError::LengthMismatch(format!(
                        "repaint frame {i}: unmasked source != target"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything the constructors need from the trained codec stack.
pub struct TaskContext<'a> {
    pub vae: &'a Vae,
    pub fsq: &'a FsqTokenizer,
    pub tokenizer: &'a CaptionTokenizer,
}

fn encode_stereo(vae: &Vae, wave: &Stereo) -> Result<LatentSeq> {
    Ok(vae.encode_wave(&wave[0], &wave[1])?)
}

fn sum_stems(song: &RenderedSong, subset: &[Instrument]) -> Stereo {
    let n = song.len();
    let mut out: Stereo = [vec![0.0; n], vec![0.0; n]];
    for instr in subset {
        if let Some(stem) = song.stems.get(instr) {
            for ch in 0..2 {
                for i in 0..n {
                    out[ch][i] += stem[ch][i];
                }
            }
        }
    }
    out
}

fn caption_tokens_for(
    ctx: &TaskContext,
    spec: &SongSpec,
    rng: &mut TensorRng,
) -> Vec<u32> {
    // Query-rewriting augmentation: train across sparsity levels.
    let cap = caption(spec);
    let level = match rng.choose_weighted(&[0.55, 0.2, 0.15, 0.1]) {
        0 => SparsityLevel::Full,
        1 => SparsityLevel::Summary,
        2 => SparsityLevel::Keywords,
        _ => SparsityLevel::SingleTag,
    };
    ctx.tokenizer.encode(&sparsify(&cap, level).full_text)
}

fn lyric_tokens(spec: &SongSpec) -> Vec<u32> {
    spec.lyrics.iter().flatten().map(|&t| u32::from(t)).collect()
}

/// Builds one training sample for the given task kind.
pub fn build_task(
    kind: TaskKind,
    ctx: &TaskContext,
    spec: &SongSpec,
    song: &RenderedSong,
    rng: &mut TensorRng,
) -> Result<TaskSample> {
    let instruments: Vec<Instrument> = spec.instruments.iter().copied().collect();
    if matches!(kind, TaskKind::Extract | TaskKind::Layer | TaskKind::Complete)
        && instruments.len() < 2
    {
        return Err(TaskError::MissingStems(format!(
            "{} needs >= 2 instruments, song has {}",
            kind.as_str(),
            instruments.len()
        )));
    }

    let mix_latent = encode_stereo(ctx.vae, &song.mix)?;
    let t = mix_latent.t;
    let meta = |segment, stems: Vec<String>| TaskMeta { song_id: spec.seed, kind, segment, stems };

    match kind {
        TaskKind::TextToMusic => {
            // Pre-training convention: the source channel carries silence.
            let cond = CondInputs::new(caption_tokens_for(ctx, spec, rng), lyric_tokens(spec));
            Ok(TaskSample {
                kind,
                source: LatentSeq::zeros(t, mix_latent.dim, mix_latent.rate_hz),
                mask: vec![1.0; t],
                target: mix_latent,
                cond,
                meta: meta(None, vec![]),
            })
        }
        TaskKind::Cover => {
            // Melodic skeleton via the quantized latent path.
            let codes = ctx.fsq.quantize(&mix_latent)?;
            let mut source = ctx.fsq.dequantize(&codes)?;
            source.frames.truncate(t * source.dim);
            source.t = t;
            // Resampled style word plus a timbre reference from elsewhere.
            let styles = all_style_tags();
            let style = styles[rng.gen_range(0..styles.len())];
            let mut cond = CondInputs::new(
                ctx.tokenizer.encode(&format!("a {style} track at {} bpm", spec.bpm)),
                lyric_tokens(spec),
            );
            if let Ok(window) = build_timbre_reference(&song.stems, rng) {
                cond.timbre_latent = Some(timbre_latent_5hz(ctx.vae, &window)?);
            }
            Ok(TaskSample {
                kind,
                source,
                mask: vec![1.0; t],
                target: mix_latent,
                cond,
                meta: meta(None, vec![style.to_string()]),
            })
        }
        TaskKind::Repaint => {
            // One seeded contiguous segment covering 10-50% of the frames.
            let min_len = (t / 10).max(2);
            let max_len = (t / 2).max(min_len + 1);
            let seg_len = min_len + rng.gen_range(0..max_len - min_len);
            if seg_len < 2 || seg_len >= t {
                return Err(TaskError::DegenerateSegment(format!(
                    "segment {seg_len} of {t} frames"
                )));
            }
            let start = rng.gen_range(0..t - seg_len);
            let mut mask = vec![0.0; t];
            mask[start..start + seg_len].iter_mut().for_each(|m| *m = 1.0);
            let cond = CondInputs::new(caption_tokens_for(ctx, spec, rng), lyric_tokens(spec));
            Ok(TaskSample {
                kind,
                source: mix_latent.clone(),
                mask,
                target: mix_latent,
                cond,
                meta: meta(Some((start, start + seg_len)), vec![]),
            })
        }
        TaskKind::Extract => {
            let target_stem = instruments[rng.gen_range(0..instruments.len())];
            let stem_latent = encode_stereo(ctx.vae, &song.stems[&target_stem])?;
            let cond = CondInputs::new(
                ctx.tokenizer.encode(&format!("extract the {} stem", target_stem.as_str())),
                vec![],
            );
            Ok(TaskSample {
                kind,
                source: mix_latent,
                mask: vec![1.0; t],
                target: stem_latent,
                cond,
                meta: meta(None, vec![target_stem.as_str().to_string()]),
            })
        }
        TaskKind::Layer => {
            // Source = subset A, target = A plus one new stem.
            let add_idx = rng.gen_range(0..instruments.len());
            let added = instruments[add_idx];
            let base: Vec<Instrument> =
                instruments.iter().copied().filter(|&i| i != added).collect();
            let keep: Vec<Instrument> = base
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.8))
                .collect();
            let keep = if keep.is_empty() { base } else { keep };
            let source = encode_stereo(ctx.vae, &sum_stems(song, &keep))?;
            let mut with_added = keep.clone();
            with_added.push(added);
            let target = encode_stereo(ctx.vae, &sum_stems(song, &with_added))?;
            let mut cond = CondInputs::new(
                ctx.tokenizer.encode(&format!("add {}", added.as_str())),
                vec![],
            );
            if let Ok(window) = build_timbre_reference(&song.stems, rng) {
                cond.timbre_latent = Some(timbre_latent_5hz(ctx.vae, &window)?);
            }
            Ok(TaskSample {
                kind,
                source,
                mask: vec![1.0; t],
                target,
                cond,
                meta: meta(None, vec![added.as_str().to_string()]),
            })
        }
        TaskKind::Complete => {
            let motif = instruments[rng.gen_range(0..instruments.len())];
            let source = encode_stereo(ctx.vae, &song.stems[&motif])?;
            let full = caption(spec);
            let cond = CondInputs::new(
                ctx.tokenizer
                    .encode(&format!("complete the arrangement. {}", full.full_text)),
                lyric_tokens(spec),
            );
            Ok(TaskSample {
                kind,
                source,
                mask: vec![1.0; t],
                target: mix_latent,
                cond,
                meta: meta(None, vec![motif.as_str().to_string()]),
            })
        }
    }
}

/// Samples a task kind from configured weights (order of [`TaskKind::ALL`]).
pub fn sample_kind(weights: &[f64; 6], rng: &mut TensorRng) -> TaskKind {
    TaskKind::ALL[rng.choose_weighted(weights)]
}

/// Phase-2 default task mixture: text-to-music 40%, the rest 12% each.
pub const PHASE2_WEIGHTS: [f64; 6] = [0.4, 0.12, 0.12, 0.12, 0.12, 0.12];

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;
    use latentcodec::CodecConfig;
    use nnkit::Params;
    use synthworld::render::render;
    use synthworld::spec::{make_spec, SpecConstraints};

    fn context() -> (Vae, FsqTokenizer, CaptionTokenizer, Params) {
        let dev = Device::Cpu;
        let cfg = CodecConfig { channels: vec![8, 12, 16, 24], ..Default::default() };
        let mut params = Params::new();
        let mut rng = TensorRng::new(0, &dev);
        let vae = Vae::build(&cfg, &mut params, &mut rng).unwrap();
        let fsq = FsqTokenizer::build(&cfg, &mut params, &mut rng).unwrap();
        (vae, fsq, CaptionTokenizer::new(), params)
    }

    #[test]
    fn text_to_music_source_is_silence() {
        let dev = Device::Cpu;
        let (vae, fsq, tok, _p) = context();
        let ctx = TaskContext { vae: &vae, fsq: &fsq, tokenizer: &tok };
        let spec = make_spec(3, &SpecConstraints::default()).unwrap();
        let song = render(&spec);
        let mut rng = TensorRng::new(1, &dev);
        let sample = build_task(TaskKind::TextToMusic, &ctx, &spec, &song, &mut rng).unwrap();
        assert_eq!(sample.source.max_abs(), 0.0);
        assert!(sample.mask.iter().all(|&m| m == 1.0));
        sample.validate().unwrap();
    }

    #[test]
    fn repaint_mask_is_contiguous_fraction() {
        let dev = Device::Cpu;
        let (vae, fsq, tok, _p) = context();
        let ctx = TaskContext { vae: &vae, fsq: &fsq, tokenizer: &tok };
        let spec = make_spec(4, &SpecConstraints::default()).unwrap();
        let song = render(&spec);
        for seed in 0..8 {
            let mut rng = TensorRng::new(seed, &dev);
            let sample = build_task(TaskKind::Repaint, &ctx, &spec, &song, &mut rng).unwrap();
            let t = sample.mask.len();
            let ones: usize = sample.mask.iter().map(|&m| m as usize).sum();
            assert!(ones >= t / 10 && ones <= t / 2 + 1, "{ones} of {t}");
            let (s, e) = sample.meta.segment.unwrap();
            assert_eq!(ones, e - s);
            sample.validate().unwrap();
        }
    }

    #[test]
    fn cover_source_is_on_dequantized_grid() {
        let dev = Device::Cpu;
        let (vae, fsq, tok, _p) = context();
        let ctx = TaskContext { vae: &vae, fsq: &fsq, tokenizer: &tok };
        let spec = make_spec(5, &SpecConstraints::default()).unwrap();
        let song = render(&spec);
        let mut rng = TensorRng::new(2, &dev);
        let sample = build_task(TaskKind::Cover, &ctx, &spec, &song, &mut rng).unwrap();
        // Recompute the dequantized path directly: must match exactly.
        let latent = vae.encode_wave(&song.mix[0], &song.mix[1]).unwrap();
        let codes = fsq.quantize(&latent).unwrap();
        let expect = fsq.dequantize(&codes).unwrap();
        assert_eq!(&sample.source.frames[..], &expect.frames[..sample.source.frames.len()]);
    }

    #[test]
    fn extract_needs_two_instruments() {
        let dev = Device::Cpu;
        let (vae, fsq, tok, _p) = context();
        let ctx = TaskContext { vae: &vae, fsq: &fsq, tokenizer: &tok };
        let mut instruments = std::collections::BTreeSet::new();
        instruments.insert(Instrument::Kick);
        let spec = make_spec(
            6,
            &SpecConstraints { instruments: Some(instruments), ..Default::default() },
        )
        .unwrap();
        let song = render(&spec);
        let mut rng = TensorRng::new(3, &dev);
        assert!(matches!(
            build_task(TaskKind::Extract, &ctx, &spec, &song, &mut rng),
            Err(TaskError::MissingStems(_))
        ));
    }

    #[test]
    fn kind_histogram_is_deterministic() {
        let dev = Device::Cpu;
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = TensorRng::new(seed, &dev);
            let mut counts = vec![0usize; 6];
            for _ in 0..600 {
                let k = sample_kind(&PHASE2_WEIGHTS, &mut rng);
                counts[TaskKind::ALL.iter().position(|&x| x == k).unwrap()] += 1;
            }
            counts
        };
        let a = draw(9);
        let b = draw(9);
        assert_eq!(a, b);
        // Roughly matches the configured weights.
        assert!(a[0] > 180 && a[0] < 300, "t2m count {a:?}");
    }
}
