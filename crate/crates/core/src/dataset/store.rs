//! Dataset directories: `manifest.json`, one float32 feature blob per domain,
//! one uint8 label blob per labeled domain, and the quarantined target labels
//! in `eval_labels.json` + `eval_labels.u8`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::domain::{ChannelStats, DatasetBundle, DomainDataset, Split, TargetLabels};
use super::features::N_CHANNELS;
use super::labels::DamageClass;
use crate::blob;
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "drift-adapt/dataset/v1";
const MANIFEST: &str = "manifest.json";
const EVAL_MANIFEST: &str = "eval_labels.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub domain_id: String,
    pub role: Role,
    pub physics: f64,
    pub story: usize,
    pub record_ids: Vec<String>,
    pub splits: Vec<Split>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class_counts: Option<[usize; 3]>,
    pub features: BlobEntry,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<BlobEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub config_hash: String,
    pub length: usize,
    pub rate: f64,
    pub stats: ChannelStats,
    pub domains: Vec<DomainEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLabelsManifest {
    pub config_hash: String,
    pub domain_id: String,
    pub labels: BlobEntry,
}

fn file_stem(domain_id: &str) -> String {
    domain_id.replace(['/', '\\'], "_")
}

fn label_bytes(labels: &[DamageClass]) -> Vec<u8> {
    labels.iter().map(|l| l.code()).collect()
}

fn write_domain(dir: &Path, d: &DomainDataset, role: Role) -> Result<DomainEntry> {
    let stem = file_stem(&d.domain_id);
    let feature_file = format!("{stem}.features.f32");
    let bytes = blob::f32_bytes(d.features.iter().copied());
    let features = BlobEntry {
        shape: vec![d.len(), d.length, N_CHANNELS],
        checksum: blob::write_bytes(&dir.join(&feature_file), &bytes)?,
        file: feature_file,
    };
    let labels = match &d.labels {
        Some(labels) => {
            let file = format!("{stem}.labels.u8");
            Some(BlobEntry {
                shape: vec![labels.len()],
                checksum: blob::write_bytes(&dir.join(&file), &label_bytes(labels))?,
                file,
            })
        }
        None => None,
    };
    Ok(DomainEntry {
        domain_id: d.domain_id.clone(),
        role,
        physics: d.physics,
        story: d.story,
        record_ids: d.record_ids.clone(),
        splits: d.splits.clone(),
        class_counts: d.class_counts(),
        features,
        labels,
    })
}

pub fn save_dataset(bundle: &DatasetBundle, eval_labels: Option<&TargetLabels>, dir: &Path) -> Result<()> {
    if bundle.target.labels.is_some() {
        return Err(Error::invalid("training-facing target domain must not carry labels"));
    }
    blob::create_dir(dir)?;
    let mut domains = Vec::with_capacity(bundle.sources.len() + 1);
    for s in &bundle.sources {
        domains.push(write_domain(dir, s, Role::Source)?);
    }
    domains.push(write_domain(dir, &bundle.target, Role::Target)?);
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        config_hash: bundle.config_hash.clone(),
        length: bundle.length,
        rate: bundle.rate,
        stats: bundle.stats,
        domains,
    };
    blob::write_json(&dir.join(MANIFEST), &manifest)?;
    if let Some(eval) = eval_labels {
        let file = "eval_labels.u8".to_string();
        let entry = EvalLabelsManifest {
            config_hash: bundle.config_hash.clone(),
            domain_id: eval.domain_id.clone(),
            labels: BlobEntry {
                shape: vec![eval.labels.len()],
                checksum: blob::write_bytes(&dir.join(&file), &label_bytes(&eval.labels))?,
                file,
            },
        };
        blob::write_json(&dir.join(EVAL_MANIFEST), &entry)?;
    }
    Ok(())
}

fn read_labels(dir: &Path, entry: &BlobEntry, expected: usize) -> Result<Vec<DamageClass>> {
    let path = dir.join(&entry.file);
    if entry.shape != [expected] {
        return Err(Error::corrupt(&path, format!("label shape {:?} != [{expected}]", entry.shape)));
    }
    blob::read_bytes(&path, expected, &entry.checksum)?
        .into_iter()
        .map(|c| DamageClass::from_code(c).ok_or_else(|| Error::corrupt(&path, format!("invalid class code {c}"))))
        .collect()
}

fn read_domain(dir: &Path, manifest: &DatasetManifest, e: &DomainEntry) -> Result<DomainDataset> {
    let n = e.record_ids.len();
    let path = dir.join(&e.features.file);
    if e.features.shape != [n, manifest.length, N_CHANNELS] || e.splits.len() != n {
        return Err(Error::corrupt(
            &path,
            format!(
                "feature shape {:?} inconsistent with {n} records of length {}",
                e.features.shape, manifest.length
            ),
        ));
    }
    let features = blob::read_f32(&path, n * manifest.length * N_CHANNELS, &e.features.checksum)?;
    let labels = match (&e.role, &e.labels) {
        (Role::Source, Some(entry)) => Some(read_labels(dir, entry, n)?),
        (Role::Source, None) => return Err(Error::corrupt(&path, "source domain without labels")),
        (Role::Target, Some(_)) => return Err(Error::corrupt(&path, "target domain carries labels")),
        (Role::Target, None) => None,
    };
    Ok(DomainDataset {
        domain_id: e.domain_id.clone(),
        physics: e.physics,
        story: e.story,
        length: manifest.length,
        features,
        labels,
        record_ids: e.record_ids.clone(),
        splits: e.splits.clone(),
        stats: manifest.stats,
    })
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = blob::read_json(&dir.join(MANIFEST))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::corrupt(dir.join(MANIFEST), format!("unsupported format {}", manifest.format)));
    }
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let manifest = load_manifest(dir)?;
    let mut sources = Vec::new();
    let mut target = None;
    for e in &manifest.domains {
        let d = read_domain(dir, &manifest, e)?;
        match e.role {
            Role::Source => sources.push(d),
            Role::Target if target.is_none() => target = Some(d),
            Role::Target => return Err(Error::corrupt(dir.join(MANIFEST), "more than one target domain")),
        }
    }
    let target = target.ok_or_else(|| Error::corrupt(dir.join(MANIFEST), "no target domain"))?;
    Ok(DatasetBundle {
        config_hash: manifest.config_hash,
        length: manifest.length,
        rate: manifest.rate,
        stats: manifest.stats,
        sources,
        target,
    })
}

/// Loads the quarantined target labels. Only evaluation calls this.
pub fn load_eval_labels(dir: &Path) -> Result<TargetLabels> {
    let manifest: EvalLabelsManifest = blob::read_json(&dir.join(EVAL_MANIFEST))?;
    let n = manifest.labels.shape.first().copied().unwrap_or(0);
    Ok(TargetLabels {
        domain_id: manifest.domain_id,
        labels: read_labels(dir, &manifest.labels, n)?,
    })
}

/// Saves then reloads the datasets.
pub fn persist_roundtrip(
    bundle: &DatasetBundle,
    eval_labels: Option<&TargetLabels>,
    dir: &Path,
) -> Result<(DatasetBundle, Option<TargetLabels>)> {
    save_dataset(bundle, eval_labels, dir)?;
    let loaded = load_dataset(dir)?;
    let labels = match eval_labels {
        Some(_) => Some(load_eval_labels(dir)?),
        None => None,
    };
    Ok((loaded, labels))
}
