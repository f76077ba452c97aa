//! Deterministic multi-stem waveform renderer.
//!
//! Each instrument lives in its own disjoint frequency band so that presence
//! and alignment are exactly recoverable by the oracles:
//!
//! - kick:  55 Hz decaying sine bursts at beat times        (band 45-62 Hz)
//! - bass:  tonic/2 sine, one sustained note per bar        (band 63-130 Hz)
//! - lead:  seeded scale-degree walk, one note per beat     (band 131-520 Hz)
//! - pad:   tonic*4 tremolo tone                            (band 521-1080 Hz)
//! - vocal: unique two-partial tone per lyric token         (band 1150-2250 Hz)

use crate::spec::{Instrument, SongSpec};
use crate::vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default sample rate of the synthetic world (Hz).
pub const SAMPLE_RATE: u32 = 4800;
/// Latent frame rate the codec targets (Hz).
pub const LATENT_RATE: u32 = 25;
/// Samples per latent frame at the default rate.
pub const SAMPLES_PER_FRAME: u32 = SAMPLE_RATE / LATENT_RATE;

pub const AMP_KICK: f64 = 0.45;
pub const AMP_BASS: f64 = 0.28;
pub const AMP_LEAD: f64 = 0.16;
pub const AMP_PAD: f64 = 0.10;
pub const AMP_VOCAL: f64 = 0.22;

/// Interleaved-channel stereo buffer: `samples[ch][i]`.
pub type Stereo = [Vec<f32>; 2];

/// One lyric alignment entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub token: u8,
    pub onset_s: f64,
    pub offset_s: f64,
}

/// A rendered song: mix, per-instrument stems, and exact lyric alignment.
#[derive(Debug, Clone)]
pub struct RenderedSong {
    pub sample_rate: u32,
    pub mix: Stereo,
    pub stems: BTreeMap<Instrument, Stereo>,
    pub alignment: Vec<AlignmentEntry>,
}

impl RenderedSong {
    /// Number of frames per channel.
    pub fn len(&self) -> usize {
        self.mix[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.mix[0].is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mono sum of the mix (mean of channels).
    pub fn mono(&self) -> Vec<f32> {
        mono_of(&self.mix)
    }
}

pub fn mono_of(wave: &Stereo) -> Vec<f32> {
    wave[0]
        .iter()
        .zip(&wave[1])
        .map(|(l, r)| 0.5 * (l + r))
        .collect()
}

/// Rendered length in samples: the musical duration rounded to a whole,
/// even number of latent frames so the codec path never needs padding.
pub fn rendered_len(spec: &SongSpec) -> usize {
    let frames = (spec.duration_s * f64::from(LATENT_RATE)).round() as usize;
    let frames = frames + (frames & 1);
    frames * SAMPLES_PER_FRAME as usize
}

fn silent(n: usize) -> Stereo {
    [vec![0.0; n], vec![0.0; n]]
}

/// Adds a pure-sine tone with linear attack/release ramps.
#[allow(clippy::too_many_arguments)]
fn add_tone(
    buf: &mut Stereo,
    sr: f64,
    onset_s: f64,
    dur_s: f64,
    freq: f64,
    amp: f64,
    ramp_s: f64,
    pan: f64,
) {
    let n = buf[0].len();
    let start = (onset_s * sr).round() as usize;
    let len = (dur_s * sr).round() as usize;
    let ramp = (ramp_s * sr).max(1.0) as usize;
    let gain_l = (1.0 - pan).min(1.0);
    let gain_r = (1.0 + pan).min(1.0);
    for i in 0..len {
        let idx = start + i;
        if idx >= n {
            break;
        }
        let env = if i < ramp {
            i as f64 / ramp as f64
        } else if i + ramp > len {
            (len - i) as f64 / ramp as f64
        } else {
            1.0
        };
        let t = i as f64 / sr;
        let v = amp * env * (2.0 * std::f64::consts::PI * freq * t).sin();
        buf[0][idx] += (v * gain_l) as f32;
        buf[1][idx] += (v * gain_r) as f32;
    }
}

fn add_kick(buf: &mut Stereo, sr: f64, onset_s: f64) {
    let n = buf[0].len();
    let start = (onset_s * sr).round() as usize;
    let len = (0.12 * sr) as usize;
    for i in 0..len {
        let idx = start + i;
        if idx >= n {
            break;
        }
        let t = i as f64 / sr;
        let env = (-t / 0.035).exp();
        let v = AMP_KICK * env * (2.0 * std::f64::consts::PI * 55.0 * t).sin();
        buf[0][idx] += v as f32;
        buf[1][idx] += v as f32;
    }
}

/// Scale intervals in semitones.
fn scale_intervals(minor: bool) -> [u8; 7] {
    if minor {
        [0, 2, 3, 5, 7, 8, 10]
    } else {
        [0, 2, 4, 5, 7, 9, 11]
    }
}

/// Renders a song spec to waveforms. Pure in `spec` (including its seed).
pub fn render(spec: &SongSpec) -> RenderedSong {
    let sr = f64::from(SAMPLE_RATE);
    let n = rendered_len(spec);
    let beat = spec.beat_s();
    let bar = spec.bar_s();
    let total_bars = spec.total_bars();
    let tonic = spec.tonic_hz();

    let mut stems: BTreeMap<Instrument, Stereo> = Instrument::ALL
        .iter()
        .map(|&i| (i, silent(n)))
        .collect();
    let mut alignment = Vec::new();

    if spec.instruments.contains(&Instrument::Kick) {
        let stem = stems.get_mut(&Instrument::Kick).unwrap();
        let n_beats = total_bars * 4;
        for b in 0..n_beats {
            add_kick(stem, sr, f64::from(b) * beat);
        }
    }

    if spec.instruments.contains(&Instrument::Bass) {
        let stem = stems.get_mut(&Instrument::Bass).unwrap();
        for b in 0..total_bars {
            add_tone(stem, sr, f64::from(b) * bar, bar, tonic / 2.0, AMP_BASS, 0.005, 0.0);
        }
    }

    if spec.instruments.contains(&Instrument::Lead) {
        let stem = stems.get_mut(&Instrument::Lead).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x4c45_4144);
        let ivals = scale_intervals(spec.minor);
        let mut deg: i32 = 0;
        let n_beats = total_bars * 4;
        for b in 0..n_beats {
            deg = (deg + rng.gen_range(-1..=1)).clamp(0, 7);
            let (oct, step) = (deg / 7, deg % 7);
            let semis = f64::from(ivals[step as usize]) + 12.0 * f64::from(oct);
            let freq = tonic * 2f64.powf(semis / 12.0);
            add_tone(stem, sr, f64::from(b) * beat, beat * 0.9, freq, AMP_LEAD, 0.008, 0.2);
        }
    }

    if spec.instruments.contains(&Instrument::Pad) {
        let stem = stems.get_mut(&Instrument::Pad).unwrap();
        add_tone(stem, sr, 0.0, spec.duration_s, tonic * 4.0, AMP_PAD, 0.05, -0.2);
        // 2 Hz tremolo keeps the pad recognizably sustained without
        // spreading energy outside its band.
        let len = stem[0].len();
        for i in 0..len {
            let t = i as f64 / sr;
            let trem = (0.75 + 0.25 * (2.0 * std::f64::consts::PI * 2.0 * t).sin()) as f32;
            stem[0][i] *= trem;
            stem[1][i] *= trem;
        }
    }

    if spec.instruments.contains(&Instrument::Vocal) {
        let stem = stems.get_mut(&Instrument::Vocal).unwrap();
        let half_beat = beat / 2.0;
        let mut section_start_bar = 0u32;
        for (section, lyr) in spec.sections.iter().zip(&spec.lyrics) {
            let t0 = f64::from(section_start_bar) * bar;
            for (j, &token) in lyr.iter().enumerate() {
                let onset = t0 + j as f64 * half_beat;
                let dur = half_beat * 0.85;
                let offset = onset + dur;
                if offset > spec.duration_s + 1e-9 {
                    break;
                }
                let (lo, hi) = vocab::partials(token);
                // 18 ms ramps keep the attack splash narrower than the
                // 60 Hz partial spacing, so matched filters stay clean.
                add_tone(stem, sr, onset, dur, lo, AMP_VOCAL * 0.5, 0.018, 0.0);
                add_tone(stem, sr, onset, dur, hi, AMP_VOCAL * 0.5, 0.018, 0.0);
                alignment.push(AlignmentEntry { token, onset_s: onset, offset_s: offset });
            }
            section_start_bar += section.bars;
        }
    }

    // Mix = exact sample-wise sum of stems; a uniform rescale keeps
    // everything in [-1, 1] without breaking the sum property.
    let mut mix = silent(n);
    for stem in stems.values() {
        for ch in 0..2 {
            for i in 0..n {
                mix[ch][i] += stem[ch][i];
            }
        }
    }
    let peak = mix
        .iter()
        .flat_map(|ch| ch.iter())
        .fold(0f32, |m, &v| m.max(v.abs()));
    if peak > 0.99 {
        let scale = 0.99 / peak;
        for buf in stems.values_mut().map(|s| s as &mut Stereo).chain(std::iter::once(&mut mix)) {
            for ch in buf.iter_mut() {
                for v in ch.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }

    RenderedSong { sample_rate: SAMPLE_RATE, mix, stems, alignment }
}
