//! On-disk storage for latents and codes: safetensors payload plus a JSON
//! header (dtype, shape, rate).

use crate::fsq::FsqCodes;
use crate::types::LatentSeq;
use crate::{CodecError, Result};
use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct LatentHeader {
    dtype: String,
    shape: Vec<usize>,
    rate_hz: f64,
    kind: String,
    levels: Option<Vec<u32>>,
}

pub fn save_latent(latent: &LatentSeq, path: &Path) -> Result<()> {
    let device = Device::Cpu;
    let tensor = latent.to_tensor(&device)?;
    let mut map = HashMap::new();
    map.insert("latent".to_string(), tensor);
    candle_core::safetensors::save(&map, path.with_extension("safetensors"))?;
    let header = LatentHeader {
        dtype: "f32".into(),
        shape: vec![latent.t, latent.dim],
        rate_hz: latent.rate_hz,
        kind: "latent".into(),
        levels: None,
    };
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&header).expect("header"),
    )
    .map_err(nnkit::NnError::Io)
    .map_err(CodecError::Nn)?;
    Ok(())
}

pub fn load_latent(path: &Path) -> Result<LatentSeq> {
    let header: LatentHeader = serde_json::from_str(
        &std::fs::read_to_string(path.with_extension("json"))
            .map_err(nnkit::NnError::Io)
            .map_err(CodecError::Nn)?,
    )
    .map_err(|e| CodecError::Invariant(format!("bad latent header: {e}")))?;
    let map = candle_core::safetensors::load(path.with_extension("safetensors"), &Device::Cpu)?;
    let tensor = map
        .get("latent")
        .ok_or_else(|| CodecError::Invariant("missing latent tensor".into()))?;
    LatentSeq::from_tensor(tensor, header.rate_hz)
}

pub fn save_codes(codes: &FsqCodes, path: &Path) -> Result<()> {
    let device = Device::Cpu;
    let tensor = Tensor::from_vec(codes.codes.clone(), codes.codes.len(), &device)?;
    let mut map = HashMap::new();
    map.insert("codes".to_string(), tensor);
    candle_core::safetensors::save(&map, path.with_extension("safetensors"))?;
    let header = LatentHeader {
        dtype: "u32".into(),
        shape: vec![codes.codes.len()],
        rate_hz: codes.rate_hz,
        kind: "codes".into(),
        levels: Some(codes.levels.clone()),
    };
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&header).expect("header"),
    )
    .map_err(nnkit::NnError::Io)
    .map_err(CodecError::Nn)?;
    Ok(())
}

pub fn load_codes(path: &Path) -> Result<FsqCodes> {
    let header: LatentHeader = serde_json::from_str(
        &std::fs::read_to_string(path.with_extension("json"))
            .map_err(nnkit::NnError::Io)
            .map_err(CodecError::Nn)?,
    )
    .map_err(|e| CodecError::Invariant(format!("bad codes header: {e}")))?;
    let map = candle_core::safetensors::load(path.with_extension("safetensors"), &Device::Cpu)?;
    let tensor = map
        .get("codes")
        .ok_or_else(|| CodecError::Invariant("missing codes tensor".into()))?;
    Ok(FsqCodes {
        codes: tensor.to_vec1::<u32>()?,
        levels: header.levels.unwrap_or_else(|| vec![8, 8, 8, 5, 5, 5]),
        rate_hz: header.rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let latent = LatentSeq {
            frames: (0..128).map(|i| i as f32 * 0.25).collect(),
            t: 2,
            dim: 64,
            rate_hz: 25.0,
        };
        let path = dir.path().join("item");
        save_latent(&latent, &path).unwrap();
        assert_eq!(load_latent(&path).unwrap(), latent);
    }

    #[test]
    fn codes_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let codes = FsqCodes { codes: vec![0, 63999, 123], levels: vec![8, 8, 8, 5, 5, 5], rate_hz: 5.0 };
        let path = dir.path().join("codes");
        save_codes(&codes, &path).unwrap();
        assert_eq!(load_codes(&path).unwrap(), codes);
    }
}
