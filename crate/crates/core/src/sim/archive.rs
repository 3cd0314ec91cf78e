//! Incremental-dynamic-analysis campaigns and their on-disk archives.
//!
//! An archive is one directory per building: `manifest.json` plus one
//! float32 little-endian blob per record with shape `[channels, n_steps]`.
//! Channels are the absolute accelerations of levels `0..=n` (x then y per
//! level) followed by the story drifts of stories `1..=n` (x then y).

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::building::BuildingSpec;
use super::integrate::{simulate_response, Biaxial, ResponseRecord};
use super::motion::{scale_motion, synthesize_motion, GroundMotion, SpectralParams};
use crate::blob;
use crate::error::{Error, Result};

pub const ARCHIVE_FORMAT: &str = "drift-adapt/response-archive/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub n_motions: usize,
    pub scale_factors: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    /// Range of dominant ground frequencies, Hz; each motion draws uniformly.
    pub dominant_freq_hz: (f64, f64),
    /// Range of ground filter damping ratios.
    pub ground_damping: (f64, f64),
    /// Peak ground acceleration at scale factor 1, m/s².
    pub pga: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_motions: 60,
            scale_factors: vec![3.0, 4.5, 6.5, 8.0, 9.5, 11.0, 13.0, 15.5, 19.0, 24.0],
            duration: 40.0,
            dt: 0.01,
            dominant_freq_hz: (0.8, 6.0),
            ground_damping: (0.2, 0.8),
            pga: 1.0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_motions == 0 || self.scale_factors.is_empty() {
            return Err(Error::invalid("campaign needs motions and scale factors"));
        }
        if self.scale_factors.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("scale factors must be positive"));
        }
        let (f0, f1) = self.dominant_freq_hz;
        let (z0, z1) = self.ground_damping;
        if !(f0 > 0.0 && f1 >= f0 && z0 > 0.0 && z1 >= z0) {
            return Err(Error::invalid("spectral parameter ranges must be positive and ordered"));
        }
        Ok(())
    }

    /// Spectral parameters of motion `k`, drawn deterministically.
    pub fn motion_params(&self, motion_seed: u64) -> SpectralParams {
        let mut rng = ChaCha8Rng::seed_from_u64(motion_seed ^ 0x5eed_5eed_5eed_5eed);
        let (f0, f1) = self.dominant_freq_hz;
        let (z0, z1) = self.ground_damping;
        SpectralParams {
            dominant_freq_hz: f0 + (f1 - f0) * rng.random::<f64>(),
            damping: z0 + (z1 - z0) * rng.random::<f64>(),
            pga: self.pga,
        }
    }

    pub fn motion_seed(global_seed: u64, k: usize) -> u64 {
        global_seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(k as u64 + 1)
    }

    /// Base (unscaled) motions of the campaign.
    pub fn motions(&self, global_seed: u64) -> Result<Vec<GroundMotion>> {
        self.validate()?;
        (0..self.n_motions)
            .map(|k| {
                let seed = Self::motion_seed(global_seed, k);
                let mut m = synthesize_motion(seed, self.duration, self.dt, &self.motion_params(seed))?;
                m.id = format!("gm{k:04}");
                Ok(m)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub record_id: String,
    pub motion_id: String,
    pub motion_seed: u64,
    pub scale_factor: f64,
    pub file: String,
    pub shape: [usize; 2],
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format: String,
    pub config_hash: String,
    pub building: BuildingSpec,
    pub dt: f64,
    pub n_steps: usize,
    pub records: Vec<RecordEntry>,
}

impl ArchiveManifest {
    pub fn n_channels(&self) -> usize {
        let n = self.building.n_stories();
        2 * (n + 1) + 2 * n
    }
}

fn record_channels(rec: &ResponseRecord) -> impl Iterator<Item = &[f64]> {
    rec.abs_accel
        .iter()
        .chain(&rec.drift)
        .flat_map(|b| [b.x.as_slice(), b.y.as_slice()])
}

/// Runs every (motion, scale) pair against `building` and writes the archive.
pub fn run_campaign(
    building: &BuildingSpec,
    campaign: &CampaignConfig,
    global_seed: u64,
    config_hash: &str,
    dir: &Path,
) -> Result<ArchiveManifest> {
    building.validate()?;
    let motions = campaign.motions(global_seed)?;
    blob::create_dir(dir)?;
    let n_steps = motions[0].n_steps;
    let mut records = Vec::with_capacity(motions.len() * campaign.scale_factors.len());
    for base in &motions {
        for (j, &scale) in campaign.scale_factors.iter().enumerate() {
            let motion = scale_motion(base, scale)?;
            let rec = simulate_response(building, &motion)?;
            let record_id = format!("{}-s{j:02}", base.id);
            let file = format!("{record_id}.f32");
            let bytes = blob::f32_bytes(record_channels(&rec).flatten().map(|v| *v as f32));
            let checksum = blob::write_bytes(&dir.join(&file), &bytes)?;
            records.push(RecordEntry {
                record_id,
                motion_id: base.id.clone(),
                motion_seed: base.seed,
                scale_factor: motion.scale_factor,
                file,
                shape: [2 * (2 * building.n_stories() + 1), n_steps],
                checksum,
            });
        }
    }
    let manifest = ArchiveManifest {
        format: ARCHIVE_FORMAT.into(),
        config_hash: config_hash.into(),
        building: building.clone(),
        dt: campaign.dt,
        n_steps,
        records,
    };
    blob::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Read access to an archive directory.
#[derive(Debug, Clone)]
pub struct Archive {
    pub dir: PathBuf,
    pub manifest: ArchiveManifest,
}

impl Archive {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: ArchiveManifest = blob::read_json(&dir.join("manifest.json"))?;
        if manifest.format != ARCHIVE_FORMAT {
            return Err(Error::Schema(format!(
                "{}: unsupported archive format {}",
                dir.display(),
                manifest.format
            )));
        }
        manifest.building.validate()?;
        let channels = manifest.n_channels();
        for r in &manifest.records {
            if r.shape != [channels, manifest.n_steps] {
                return Err(Error::Schema(format!(
                    "record {} has shape {:?}, expected {:?}",
                    r.record_id,
                    r.shape,
                    [channels, manifest.n_steps]
                )));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.records.is_empty()
    }

    pub fn record(&self, index: usize) -> Result<ResponseRecord> {
        let entry = self
            .manifest
            .records
            .get(index)
            .ok_or_else(|| Error::invalid(format!("record index {index} out of range")))?;
        let [channels, steps] = entry.shape;
        let path = self.dir.join(&entry.file);
        let values = blob::read_f32(&path, channels * steps, &entry.checksum)?;
        let mut rows = values
            .chunks_exact(steps)
            .map(|c| c.iter().map(|v| f64::from(*v)).collect::<Vec<f64>>());
        let n = self.manifest.building.n_stories();
        let mut take = |count: usize| -> Vec<Biaxial> {
            (0..count)
                .map(|_| Biaxial {
                    x: rows.next().unwrap_or_default(),
                    y: rows.next().unwrap_or_default(),
                })
                .collect()
        };
        let abs_accel = take(n + 1);
        let drift = take(n);
        Ok(ResponseRecord {
            building_id: self.manifest.building.id.clone(),
            motion_id: entry.motion_id.clone(),
            scale_factor: entry.scale_factor,
            dt: self.manifest.dt,
            abs_accel,
            drift,
        })
    }
}
