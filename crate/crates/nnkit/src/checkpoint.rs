//! Checkpoints: safetensors weights plus a JSON header carrying the
//! serialized config and its hash, for compatibility checks on load.

use crate::params::Params;
use crate::{NnError, Result};
use candle_core::Device;
use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    config_hash: String,
    config: serde_json::Value,
    step: usize,
}

/// Writes `<path>.safetensors` and `<path>.json`.
pub fn save_checkpoint<C: Serialize>(
    params: &Params,
    config: &C,
    step: usize,
    path: &Path,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let map = params.tensor_map();
    candle_core::safetensors::save(&map, path.with_extension("safetensors"))?;
    let header = Header {
        config_hash: config_hash(config),
        config: serde_json::to_value(config).expect("config serializes"),
        step,
    };
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(&header).expect("header"))?;
    std::fs::rename(tmp, path.with_extension("json"))?;
    Ok(())
}

/// Loads weights into `params`, verifying the config hash matches.
/// Returns (config, step).
pub fn load_checkpoint<C: DeserializeOwned + Serialize>(
    params: &mut Params,
    path: &Path,
    device: &Device,
) -> Result<(C, usize)> {
    let header: Header = serde_json::from_str(
        &std::fs::read_to_string(path.with_extension("json"))
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?,
    )
    .map_err(|e| NnError::Checkpoint(format!("bad header: {e}")))?;
    let config: C = serde_json::from_value(header.config.clone())
        .map_err(|e| NnError::Checkpoint(format!("bad config: {e}")))?;
    if config_hash(&config) != header.config_hash {
        return Err(NnError::Checkpoint("config hash mismatch".into()));
    }
    let map = candle_core::safetensors::load(path.with_extension("safetensors"), device)?;
    params.load_tensor_map(&map)?;
    Ok((config, header.step))
}
