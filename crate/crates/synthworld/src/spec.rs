//! Symbolic song specifications and their seeded generator.

use crate::{vocab, Result, SynthError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const BPM_MIN: u32 = 60;
pub const BPM_MAX: u32 = 180;
/// Beats per bar (fixed 4/4 meter).
pub const BEATS_PER_BAR: u32 = 4;

/// Pitch-class names, index 0 = C.
pub const PITCH_CLASS_NAMES: [&str; 12] =
    ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Tonic frequency in Hz for a pitch class (C3-referenced).
pub fn tonic_hz(key_pc: u8) -> f64 {
    130.8128 * 2f64.powf(f64::from(key_pc) / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionLabel {
    Intro,
    Verse,
    Chorus,
    Bridge,
    Outro,
}

impl SectionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SectionLabel::Intro => "intro",
            SectionLabel::Verse => "verse",
            SectionLabel::Chorus => "chorus",
            SectionLabel::Bridge => "bridge",
            SectionLabel::Outro => "outro",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "intro" => Some(SectionLabel::Intro),
            "verse" => Some(SectionLabel::Verse),
            "chorus" => Some(SectionLabel::Chorus),
            "bridge" => Some(SectionLabel::Bridge),
            "outro" => Some(SectionLabel::Outro),
            _ => None,
        }
    }

    /// Sections that carry lyrics when the song has a vocal stem.
    pub fn is_vocal(&self) -> bool {
        matches!(self, SectionLabel::Verse | SectionLabel::Chorus | SectionLabel::Bridge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Kick,
    Bass,
    Lead,
    Pad,
    Vocal,
}

impl Instrument {
    pub const ALL: [Instrument; 5] = [
        Instrument::Kick,
        Instrument::Bass,
        Instrument::Lead,
        Instrument::Pad,
        Instrument::Vocal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Instrument::Kick => "kick",
            Instrument::Bass => "bass",
            Instrument::Lead => "lead",
            Instrument::Pad => "pad",
            Instrument::Vocal => "vocal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kick" => Some(Instrument::Kick),
            "bass" => Some(Instrument::Bass),
            "lead" => Some(Instrument::Lead),
            "pad" => Some(Instrument::Pad),
            "vocal" => Some(Instrument::Vocal),
            _ => None,
        }
    }
}

/// One song section: label plus bar count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: SectionLabel,
    pub bars: u32,
}

/// Symbolic ground truth for one synthetic song.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongSpec {
    pub seed: u64,
    /// Beats per minute in `[60, 180]`.
    pub bpm: u32,
    /// Pitch-class index 0-11 (0 = C).
    pub key_pc: u8,
    /// Mode flag: true = minor, false = major.
    pub minor: bool,
    /// Musical duration in seconds, exactly `bars * 240 / bpm`.
    pub duration_s: f64,
    pub sections: Vec<Section>,
    /// Per-section lyric token ids from the closed 64-token vocabulary.
    /// Non-vocal sections carry empty lists.
    pub lyrics: Vec<Vec<u8>>,
    pub instruments: BTreeSet<Instrument>,
    /// Genre word derived from (bpm band x vocal presence).
    pub style_tag: String,
}

/// 8 genre words indexed by bpm band (rows) and vocal presence (columns).
const STYLE_TABLE: [[&str; 2]; 4] = [
    ["ambient", "hymn"],
    ["lofi", "ballad"],
    ["house", "pop"],
    ["techno", "dnb"],
];

/// All possible style tags.
pub fn all_style_tags() -> Vec<&'static str> {
    STYLE_TABLE.iter().flatten().copied().collect()
}

/// Deterministic style word from bpm band and instrument set.
pub fn style_tag(bpm: u32, instruments: &BTreeSet<Instrument>) -> String {
    let band = match bpm {
        0..=89 => 0,
        90..=119 => 1,
        120..=149 => 2,
        _ => 3,
    };
    let vocal = usize::from(instruments.contains(&Instrument::Vocal));
    STYLE_TABLE[band][vocal].to_string()
}

impl SongSpec {
    pub fn total_bars(&self) -> u32 {
        self.sections.iter().map(|s| s.bars).sum()
    }

    /// Full key name, e.g. "A minor".
    pub fn key_name(&self) -> String {
        format!(
            "{} {}",
            PITCH_CLASS_NAMES[self.key_pc as usize],
            if self.minor { "minor" } else { "major" }
        )
    }

    pub fn tonic_hz(&self) -> f64 {
        tonic_hz(self.key_pc)
    }

    /// Seconds per beat.
    pub fn beat_s(&self) -> f64 {
        60.0 / f64::from(self.bpm)
    }

    /// Seconds per bar.
    pub fn bar_s(&self) -> f64 {
        240.0 / f64::from(self.bpm)
    }

    /// Validates all invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(BPM_MIN..=BPM_MAX).contains(&self.bpm) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "bpm".into(),
                detail: format!("{} not in [{BPM_MIN},{BPM_MAX}]", self.bpm),
            });
        }
        if self.key_pc > 11 {
            return Err(SynthError::ConstraintOutOfRange {
                field: "key_pc".into(),
                detail: format!("{} not in [0,11]", self.key_pc),
            });
        }
        if self.sections.is_empty() {
            return Err(SynthError::ConstraintOutOfRange {
                field: "sections".into(),
                detail: "empty".into(),
            });
        }
        if self.sections.iter().any(|s| s.bars == 0) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "sections".into(),
                detail: "zero-bar section".into(),
            });
        }
        let expect = f64::from(self.total_bars()) * 240.0 / f64::from(self.bpm);
        if (self.duration_s - expect).abs() > 1e-9 {
            return Err(SynthError::ConstraintOutOfRange {
                field: "duration_s".into(),
                detail: format!("{} != bars*240/bpm = {expect}", self.duration_s),
            });
        }
        if self.lyrics.len() != self.sections.len() {
            return Err(SynthError::ConstraintOutOfRange {
                field: "lyrics".into(),
                detail: "per-section list length mismatch".into(),
            });
        }
        if self.lyrics.iter().flatten().any(|&t| t as usize >= vocab::VOCAB_SIZE) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "lyrics".into(),
                detail: "token id >= 64".into(),
            });
        }
        if self.instruments.is_empty() {
            return Err(SynthError::ConstraintOutOfRange {
                field: "instruments".into(),
                detail: "empty".into(),
            });
        }
        if self.style_tag != style_tag(self.bpm, &self.instruments) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "style_tag".into(),
                detail: "inconsistent with bpm band and instruments".into(),
            });
        }
        Ok(())
    }
}

/// Optional field overrides for [`make_spec`]. Present fields are copied
/// verbatim (after range validation); absent fields are drawn from the seed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpecConstraints {
    pub bpm: Option<u32>,
    pub key_pc: Option<u8>,
    pub minor: Option<bool>,
    pub sections: Option<Vec<Section>>,
    pub lyrics: Option<Vec<Vec<u8>>>,
    pub instruments: Option<BTreeSet<Instrument>>,
}

/// Lyric slots in a section: one token per half-beat.
pub fn section_slots(bars: u32) -> u32 {
    bars * BEATS_PER_BAR * 2
}

/// Generates a [`SongSpec`] from a seed; constrained fields are copied
/// verbatim, unconstrained fields are drawn from a seeded generator.
pub fn make_spec(seed: u64, constraints: &SpecConstraints) -> Result<SongSpec> {
    if let Some(bpm) = constraints.bpm {
        if !(BPM_MIN..=BPM_MAX).contains(&bpm) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "bpm".into(),
                detail: format!("{bpm} not in [{BPM_MIN},{BPM_MAX}]"),
            });
        }
    }
    if let Some(pc) = constraints.key_pc {
        if pc > 11 {
            return Err(SynthError::ConstraintOutOfRange {
                field: "key_pc".into(),
                detail: format!("{pc} not in [0,11]"),
            });
        }
    }
    if let Some(sections) = &constraints.sections {
        if sections.is_empty() || sections.iter().any(|s| s.bars == 0) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "sections".into(),
                detail: "must be non-empty with positive bar counts".into(),
            });
        }
    }
    if let Some(instr) = &constraints.instruments {
        if instr.is_empty() {
            return Err(SynthError::ConstraintOutOfRange {
                field: "instruments".into(),
                detail: "must be non-empty".into(),
            });
        }
    }
    if let Some(lyr) = &constraints.lyrics {
        if lyr.iter().flatten().any(|&t| t as usize >= vocab::VOCAB_SIZE) {
            return Err(SynthError::ConstraintOutOfRange {
                field: "lyrics".into(),
                detail: "token id >= 64".into(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Fixed draw order keeps unconstrained fields stable per seed.
    let drawn_bpm = rng.gen_range(BPM_MIN..=BPM_MAX);
    let bpm = constraints.bpm.unwrap_or(drawn_bpm);
    let drawn_pc = rng.gen_range(0..12u8);
    let key_pc = constraints.key_pc.unwrap_or(drawn_pc);
    let drawn_minor = rng.gen_bool(0.5);
    let minor = constraints.minor.unwrap_or(drawn_minor);

    // Keep the song short: at most 8 bars, and no longer than ~20 seconds.
    let max_bars = (bpm / 12).clamp(4, 8);
    let total_bars = rng.gen_range(4..=max_bars.max(4));
    let drawn_sections = draw_sections(&mut rng, total_bars);
    let sections = constraints.sections.clone().unwrap_or(drawn_sections);

    let drawn_instruments = draw_instruments(&mut rng);
    let instruments = constraints.instruments.clone().unwrap_or(drawn_instruments);

    let lyrics = match &constraints.lyrics {
        Some(l) => {
            if l.len() != sections.len() {
                return Err(SynthError::ConstraintOutOfRange {
                    field: "lyrics".into(),
                    detail: "per-section list length mismatch".into(),
                });
            }
            l.clone()
        }
        None => draw_lyrics(&mut rng, &sections, instruments.contains(&Instrument::Vocal)),
    };

    let total: u32 = sections.iter().map(|s| s.bars).sum();
    let duration_s = f64::from(total) * 240.0 / f64::from(bpm);
    let spec = SongSpec {
        seed,
        bpm,
        key_pc,
        minor,
        duration_s,
        sections,
        lyrics,
        instruments: instruments.clone(),
        style_tag: style_tag(bpm, &instruments),
    };
    spec.validate()?;
    Ok(spec)
}

fn draw_sections(rng: &mut ChaCha8Rng, total_bars: u32) -> Vec<Section> {
    // Simple grammar: [intro] verse chorus [outro], bars split across parts.
    let mut parts: Vec<SectionLabel> = vec![SectionLabel::Verse, SectionLabel::Chorus];
    if total_bars >= 6 && rng.gen_bool(0.5) {
        parts.insert(0, SectionLabel::Intro);
    }
    if total_bars >= 8 && rng.gen_bool(0.5) {
        parts.push(SectionLabel::Outro);
    }
    let n = parts.len() as u32;
    let mut bars = vec![1u32; parts.len()];
    let mut rest = total_bars - n;
    // Middle sections absorb the remaining bars.
    while rest > 0 {
        let i = rng.gen_range(0..parts.len());
        bars[i] += 1;
        rest -= 1;
    }
    parts
        .into_iter()
        .zip(bars)
        .map(|(label, bars)| Section { label, bars })
        .collect()
}

fn draw_instruments(rng: &mut ChaCha8Rng) -> BTreeSet<Instrument> {
    // Kick and bass are near-universal anchors; lead/pad/vocal optional.
    let mut set = BTreeSet::new();
    set.insert(Instrument::Kick);
    set.insert(Instrument::Bass);
    if rng.gen_bool(0.7) {
        set.insert(Instrument::Lead);
    }
    if rng.gen_bool(0.4) {
        set.insert(Instrument::Pad);
    }
    if rng.gen_bool(0.5) {
        set.insert(Instrument::Vocal);
    }
    set
}

fn draw_lyrics(rng: &mut ChaCha8Rng, sections: &[Section], has_vocal: bool) -> Vec<Vec<u8>> {
    // No immediate token repeats: back-to-back identical syllables would
    // merge into one matched-filter event and defeat exact alignment.
    let mut prev: Option<u8> = None;
    sections
        .iter()
        .map(|s| {
            if !has_vocal || !s.label.is_vocal() {
                return Vec::new();
            }
            let slots = section_slots(s.bars);
            let len = rng.gen_range(slots / 2..=slots);
            (0..len)
                .map(|_| {
                    let mut t = rng.gen_range(0..64u8);
                    if Some(t) == prev {
                        t = (t + 1) % 64;
                    }
                    prev = Some(t);
                    t
                })
                .collect()
        })
        .collect()
}
