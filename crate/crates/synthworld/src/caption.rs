//! Templated captions and their sparsification levels.

use crate::spec::SongSpec;
use crate::{Result, SynthError};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityLevel {
    Full,
    Summary,
    Keywords,
    SingleTag,
}

impl FromStr for SparsityLevel {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SparsityLevel::Full),
            "summary" => Ok(SparsityLevel::Summary),
            "keywords" => Ok(SparsityLevel::Keywords),
            "single_tag" => Ok(SparsityLevel::SingleTag),
            other => Err(SynthError::UnknownLevel(other.into())),
        }
    }
}

/// A natural-language description of a song at some sparsity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub full_text: String,
    pub tags: Vec<String>,
    pub sparsity_level: SparsityLevel,
    /// Structured claims the text makes, for oracle verification.
    pub claimed_bpm: Option<u32>,
    pub claimed_key_pc: Option<u8>,
    pub claimed_minor: Option<bool>,
    pub claimed_instruments: Vec<String>,
}

/// Full-level caption: mentions style, bpm, key, and every instrument
/// exactly once.
pub fn caption(spec: &SongSpec) -> Caption {
    let instruments: Vec<String> =
        spec.instruments.iter().map(|i| i.as_str().to_string()).collect();
    let listed = match instruments.len() {
        1 => instruments[0].clone(),
        n => format!("{} and {}", instruments[..n - 1].join(", "), instruments[n - 1]),
    };
    let full_text = format!(
        "A {} track at {} bpm in {}, featuring {}.",
        spec.style_tag,
        spec.bpm,
        spec.key_name(),
        listed
    );
    let mut tags = vec![spec.style_tag.clone(), format!("{}bpm", spec.bpm), spec.key_name()];
    tags.extend(instruments.iter().cloned());
    Caption {
        full_text,
        tags,
        sparsity_level: SparsityLevel::Full,
        claimed_bpm: Some(spec.bpm),
        claimed_key_pc: Some(spec.key_pc),
        claimed_minor: Some(spec.minor),
        claimed_instruments: instruments,
    }
}

/// Reduces a caption to a sparser level. Deterministic given (caption, level).
pub fn sparsify(cap: &Caption, level: SparsityLevel) -> Caption {
    let style = cap.tags.first().cloned().unwrap_or_default();
    match level {
        SparsityLevel::Full => Caption { sparsity_level: SparsityLevel::Full, ..cap.clone() },
        SparsityLevel::Summary => {
            let bpm_text = cap
                .claimed_bpm
                .map(|b| format!(" at {b} bpm"))
                .unwrap_or_default();
            Caption {
                full_text: format!("A {style} track{bpm_text}."),
                tags: cap.tags.iter().take(2).cloned().collect(),
                sparsity_level: SparsityLevel::Summary,
                claimed_bpm: cap.claimed_bpm,
                claimed_key_pc: None,
                claimed_minor: None,
                claimed_instruments: Vec::new(),
            }
        }
        SparsityLevel::Keywords => Caption {
            full_text: cap.tags.join(", "),
            tags: cap.tags.clone(),
            sparsity_level: SparsityLevel::Keywords,
            claimed_bpm: cap.claimed_bpm,
            claimed_key_pc: cap.claimed_key_pc,
            claimed_minor: cap.claimed_minor,
            claimed_instruments: cap.claimed_instruments.clone(),
        },
        SparsityLevel::SingleTag => Caption {
            full_text: style.clone(),
            tags: vec![style],
            sparsity_level: SparsityLevel::SingleTag,
            claimed_bpm: None,
            claimed_key_pc: None,
            claimed_minor: None,
            claimed_instruments: Vec::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{make_spec, SpecConstraints};

    #[test]
    fn full_mentions_everything_once() {
        let spec = make_spec(
            0,
            &SpecConstraints { bpm: Some(120), ..Default::default() },
        )
        .unwrap();
        let c = caption(&spec);
        assert_eq!(c.full_text.matches(&spec.style_tag).count(), 1);
        assert_eq!(c.full_text.matches("120").count(), 1);
        assert_eq!(c.full_text.matches(&spec.key_name()).count(), 1);
        for i in &spec.instruments {
            assert_eq!(
                c.full_text.matches(i.as_str()).count(),
                1,
                "instrument {} in {:?}",
                i.as_str(),
                c.full_text
            );
        }
    }

    #[test]
    fn single_tag_keeps_style_only() {
        let spec = make_spec(1, &SpecConstraints::default()).unwrap();
        let c = sparsify(&caption(&spec), SparsityLevel::SingleTag);
        assert_eq!(c.tags, vec![spec.style_tag.clone()]);
        assert_eq!(c.full_text, spec.style_tag);
    }

    #[test]
    fn summary_keeps_style_and_bpm_no_instruments() {
        let spec = make_spec(2, &SpecConstraints::default()).unwrap();
        let c = sparsify(&caption(&spec), SparsityLevel::Summary);
        assert!(c.full_text.contains(&spec.style_tag));
        assert!(c.full_text.contains(&format!("{} bpm", spec.bpm)));
        for i in &spec.instruments {
            if i.as_str() != spec.style_tag {
                assert!(!c.full_text.contains(i.as_str()), "{:?}", c.full_text);
            }
        }
    }

    #[test]
    fn unknown_level_errors() {
        assert!("verbose".parse::<SparsityLevel>().is_err());
    }
}
