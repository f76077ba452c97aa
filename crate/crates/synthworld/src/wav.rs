//! PCM16 WAV read/write for stereo buffers.

use crate::render::Stereo;
use crate::{Result, SynthError};
use std::path::Path;

pub fn write_wav(path: &Path, wave: &Stereo, sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| SynthError::Wav(e.to_string()))?;
    for i in 0..wave[0].len() {
        for ch in wave {
            let v = (ch[i].clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer.write_sample(v).map_err(|e| SynthError::Wav(e.to_string()))?;
        }
    }
    writer.finalize().map_err(|e| SynthError::Wav(e.to_string()))?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<(Stereo, u32)> {
    let mut reader =
        hound::WavReader::open(path).map_err(|e| SynthError::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 2 || spec.bits_per_sample != 16 {
        return Err(SynthError::Wav(format!(
            "expected stereo PCM16, got {} ch {} bit",
            spec.channels, spec.bits_per_sample
        )));
    }
    let mut wave: Stereo = [Vec::new(), Vec::new()];
    for (i, s) in reader.samples::<i16>().enumerate() {
        let v = s.map_err(|e| SynthError::Wav(e.to_string()))?;
        wave[i % 2].push(f32::from(v) / 32767.0);
    }
    Ok((wave, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let wave: Stereo = [
            (0..480).map(|i| (i as f32 / 480.0).sin() * 0.5).collect(),
            (0..480).map(|i| (i as f32 / 240.0).cos() * 0.5).collect(),
        ];
        write_wav(&path, &wave, 4800).unwrap();
        let (back, sr) = read_wav(&path).unwrap();
        assert_eq!(sr, 4800);
        assert_eq!(back[0].len(), 480);
        for ch in 0..2 {
            for i in 0..480 {
                assert!((back[ch][i] - wave[ch][i]).abs() < 1.0 / 32000.0);
            }
        }
    }
}
