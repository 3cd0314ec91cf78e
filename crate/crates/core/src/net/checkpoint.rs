//! Checkpoint directories: `manifest.json` plus one float32 little-endian
//! blob per parameter array, named after the array.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{NetworkConfig, ParameterStore};
use crate::blob;
use crate::dataset::BlobEntry;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "drift-adapt/checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    #[serde(flatten)]
    pub blob: BlobEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub config_hash: String,
    pub network: NetworkConfig,
    pub seed: u64,
    pub steps: u64,
    pub arrays: Vec<ArrayEntry>,
}

/// Rounds every value to the nearest `f32`, the precision stored on disk.
pub fn round_to_f32(params: &mut ParameterStore) {
    for p in params.iter_mut() {
        for v in &mut p.data {
            *v = f64::from(*v as f32);
        }
    }
}

pub fn save_checkpoint(
    params: &ParameterStore,
    network: &NetworkConfig,
    seed: u64,
    steps: u64,
    config_hash: &str,
    dir: &Path,
) -> Result<CheckpointManifest> {
    if !params.same_layout(&ParameterStore::zeros(network)) {
        return Err(Error::invalid("parameters do not match the network config"));
    }
    blob::create_dir(dir)?;
    let mut arrays = Vec::new();
    for p in params.iter() {
        let file = format!("{}.f32", p.name);
        let bytes = blob::f32_bytes(p.data.iter().map(|v| *v as f32));
        arrays.push(ArrayEntry {
            name: p.name.clone(),
            blob: BlobEntry {
                shape: p.shape.clone(),
                checksum: blob::write_bytes(&dir.join(&file), &bytes)?,
                file,
            },
        });
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        config_hash: config_hash.into(),
        network: network.clone(),
        seed,
        steps,
        arrays,
    };
    blob::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(ParameterStore, CheckpointManifest)> {
    let path = dir.join("manifest.json");
    let manifest: CheckpointManifest = blob::read_json(&path)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Schema(format!("{}: unsupported checkpoint format {}", dir.display(), manifest.format)));
    }
    manifest.network.validate()?;
    let mut params = ParameterStore::zeros(&manifest.network);
    if params.iter().count() != manifest.arrays.len() {
        return Err(Error::corrupt(&path, "array list does not match the network config"));
    }
    for (p, entry) in params.iter_mut().zip(&manifest.arrays) {
        if p.name != entry.name || p.shape != entry.blob.shape {
            return Err(Error::corrupt(&path, format!("array {} has unexpected name or shape", entry.name)));
        }
        let values = blob::read_f32(&dir.join(&entry.blob.file), p.data.len(), &entry.blob.checksum)?;
        p.data = values.into_iter().map(f64::from).collect();
    }
    Ok((params, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;

    #[test]
    fn roundtrip_is_exact_after_f32_rounding() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig::default();
        let mut p = init_params(&cfg, 3).unwrap();
        round_to_f32(&mut p);
        save_checkpoint(&p, &cfg, 3, 10, "h", dir.path()).unwrap();
        let (q, m) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(p, q);
        assert_eq!((m.seed, m.steps, m.config_hash.as_str()), (3, 10, "h"));
        assert!(dir.path().join("conv0.weight.f32").exists());
    }

    #[test]
    fn tampered_array_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig::default();
        let p = init_params(&cfg, 3).unwrap();
        save_checkpoint(&p, &cfg, 3, 0, "h", dir.path()).unwrap();
        let f = dir.path().join("classifier.out.bias.f32");
        std::fs::write(&f, [7u8; 12]).unwrap();
        let r = load_checkpoint(dir.path());
        assert!(matches!(r, Err(Error::Corrupt { .. })));
    }
}
