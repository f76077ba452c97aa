//! Dataset builder: rendered songs, captions, alignments, and the
//! phase-tagged manifest used by the training curriculum.

use crate::caption::{caption, Caption};
use crate::filter::filter_pair;
use crate::render::{render, AlignmentEntry};
use crate::spec::{make_spec, SongSpec, SpecConstraints};
use crate::{mix_seed, wav, Result, SynthError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One line of the dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: u64,
    pub paths: RecordPaths,
    pub spec: SongSpec,
    pub caption: Caption,
    /// Curriculum phase this song belongs to (1, 2 or 3).
    pub phase: u8,
    pub filter_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordPaths {
    pub audio: String,
    pub meta: String,
}

/// Per-song JSON sidecar with the exact alignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SongMeta {
    pub spec: SongSpec,
    pub caption: Caption,
    pub alignment: Vec<AlignmentEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l)
                    .map_err(|e| SynthError::Dataset(format!("bad manifest line: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    pub fn phase(&self, phase: u8) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }
}

/// Pool sizes in the 20:17:2 ratio, scaled to `n`.
pub fn pool_sizes(n: usize) -> (usize, usize, usize) {
    let n3 = ((n as f64 * 2.0 / 39.0).round() as usize).min(n);
    let n1 = ((n as f64 * 20.0 / 39.0).round() as usize).min(n - n3);
    let n2 = n - n1 - n3;
    (n1, n2, n3)
}

/// Builds `n` songs under `out_dir` and writes a line-delimited manifest.
///
/// Phase pools follow the 20:17:2 ratio; the phase-3 pool takes the
/// top-scoring pairs and phase 2 the next tier, so later curriculum phases
/// see the best-aligned data.
pub fn build_dataset(n: usize, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(SynthError::Dataset("n must be >= 1".into()));
    }
    fs::create_dir_all(out_dir.join("audio"))?;
    fs::create_dir_all(out_dir.join("meta"))?;

    struct Built {
        id: u64,
        spec: SongSpec,
        caption: Caption,
        score: f64,
        audio: PathBuf,
        meta: PathBuf,
    }

    let mut built = Vec::with_capacity(n);
    for i in 0..n {
        let id = i as u64;
        let spec = make_spec(mix_seed(seed, id), &SpecConstraints::default())?;
        let song = render(&spec);
        let cap = caption(&spec);
        let report = filter_pair(&song, &cap);

        let audio = out_dir.join("audio").join(format!("{id:06}.wav"));
        let meta = out_dir.join("meta").join(format!("{id:06}.json"));
        wav::write_wav(&audio, &song.mix, song.sample_rate)?;
        let sidecar = SongMeta {
            spec: spec.clone(),
            caption: cap.clone(),
            alignment: song.alignment.clone(),
        };
        atomic_write(&meta, serde_json::to_string_pretty(&sidecar).unwrap().as_bytes())?;

        built.push(Built { id, spec, caption: cap, score: report.score, audio, meta });
    }

    // Rank by (score desc, id asc); best songs feed the later phases.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        built[b]
            .score
            .partial_cmp(&built[a].score)
            .unwrap()
            .then(built[a].id.cmp(&built[b].id))
    });
    let (_n1, n2, n3) = pool_sizes(n);
    let mut phases = vec![1u8; n];
    for (rank, &idx) in order.iter().enumerate() {
        phases[idx] = if rank < n3 {
            3
        } else if rank < n3 + n2 {
            2
        } else {
            1
        };
    }

    let records: Vec<ManifestRecord> = built
        .iter()
        .enumerate()
        .map(|(i, b)| ManifestRecord {
            id: b.id,
            paths: RecordPaths {
                audio: b.audio.strip_prefix(out_dir).unwrap().to_string_lossy().into_owned(),
                meta: b.meta.strip_prefix(out_dir).unwrap().to_string_lossy().into_owned(),
            },
            spec: b.spec.clone(),
            caption: b.caption.clone(),
            phase: phases[i],
            filter_score: b.score,
        })
        .collect();

    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).unwrap());
        lines.push('\n');
    }
    atomic_write(&out_dir.join("manifest.jsonl"), lines.as_bytes())?;
    Ok(DatasetManifest { records })
}

/// Write-temp-then-rename, so readers never observe partial files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_ratio_matches_39() {
        assert_eq!(pool_sizes(39), (20, 17, 2));
    }

    #[test]
    fn zero_songs_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(build_dataset(0, 0, dir.path()).is_err());
    }
}
