use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, N_CHANNELS};
use super::labels::{classify_drift, peak_drift_ratio, DamageClass};
use crate::error::{Error, Result};
use crate::sim::Archive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

/// Per-channel z-scoring statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; N_CHANNELS],
    pub std: [f64; N_CHANNELS],
}

impl ChannelStats {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; N_CHANNELS],
            std: [1.0; N_CHANNELS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Samples per feature window.
    pub length: usize,
    /// Feature sampling rate, Hz.
    pub rate: f64,
    pub source_stories: Vec<usize>,
    pub target_story: usize,
    /// Fractions of records assigned to validation and test; the rest train.
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub standardize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            length: 2048,
            rate: 50.0,
            source_stories: vec![1, 2, 3],
            target_story: 1,
            val_fraction: 0.15,
            test_fraction: 0.15,
            standardize: true,
        }
    }
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSample<'a> {
    /// Row-major `length × 4` features.
    pub x: &'a [f32],
    pub label: Option<DamageClass>,
    pub domain_id: &'a str,
    pub story: usize,
    pub record_id: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub domain_id: String,
    /// Relative height, story index over number of stories.
    pub physics: f64,
    pub story: usize,
    pub length: usize,
    /// `n × length × 4`, row-major.
    pub features: Vec<f32>,
    /// Present for sources only.
    pub labels: Option<Vec<DamageClass>>,
    pub record_ids: Vec<String>,
    pub splits: Vec<Split>,
    pub stats: ChannelStats,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.record_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_ids.is_empty()
    }

    pub fn sample_size(&self) -> usize {
        self.length * N_CHANNELS
    }

    pub fn x(&self, i: usize) -> &[f32] {
        let s = self.sample_size();
        &self.features[i * s..(i + 1) * s]
    }

    pub fn sample(&self, i: usize) -> FeatureSample<'_> {
        FeatureSample {
            x: self.x(i),
            label: self.labels.as_ref().map(|l| l[i]),
            domain_id: &self.domain_id,
            story: self.story,
            record_id: &self.record_ids[i],
        }
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Copy restricted to the given sample indices.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.sample_size());
        for &i in indices {
            features.extend_from_slice(self.x(i));
        }
        Self {
            features,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            record_ids: indices.iter().map(|&i| self.record_ids[i].clone()).collect(),
            splits: indices.iter().map(|&i| self.splits[i]).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            domain_id: self.domain_id.clone(),
            physics: self.physics,
            story: self.story,
            length: self.length,
            features: Vec::new(),
            labels: None,
            record_ids: Vec::new(),
            splits: Vec::new(),
            stats: self.stats,
        }
    }

    pub fn class_counts(&self) -> Option<[usize; 3]> {
        self.labels.as_ref().map(|labels| {
            let mut counts = [0; 3];
            for l in labels {
                counts[l.index()] += 1;
            }
            counts
        })
    }
}

/// Proportion of each damage class in a labeled dataset.
pub fn class_distribution(dataset: &DomainDataset) -> Result<[f64; 3]> {
    let counts = dataset
        .class_counts()
        .ok_or_else(|| Error::invalid(format!("domain {} is unlabeled", dataset.domain_id)))?;
    let total = dataset.len();
    if total == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

/// Target labels kept apart from the training-facing dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLabels {
    pub domain_id: String,
    pub labels: Vec<DamageClass>,
}

/// Training-facing datasets: labeled sources and the unlabeled target.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub config_hash: String,
    pub length: usize,
    pub rate: f64,
    pub stats: ChannelStats,
    pub sources: Vec<DomainDataset>,
    pub target: DomainDataset,
}

pub fn domain_id(building_id: &str, story: usize) -> String {
    format!("{building_id}/story{story}")
}

struct RawDomain {
    story: usize,
    physics: f64,
    features: Vec<f64>,
    labels: Vec<DamageClass>,
    record_ids: Vec<String>,
}

fn extract_domains(archive: &Archive, stories: &[usize], config: &DatasetConfig) -> Result<Vec<RawDomain>> {
    let building = &archive.manifest.building;
    let n = building.n_stories();
    if let Some(&bad) = stories.iter().find(|&&s| s == 0 || s > n) {
        return Err(Error::Schema(format!(
            "archive {} has {n} stories; story {bad} is missing",
            archive.dir.display()
        )));
    }
    if archive.is_empty() {
        return Err(Error::Schema(format!("archive {} has no records", archive.dir.display())));
    }
    let mut domains: Vec<RawDomain> = stories
        .iter()
        .map(|&story| RawDomain {
            story,
            physics: story as f64 / n as f64,
            features: Vec::with_capacity(archive.len() * config.length * N_CHANNELS),
            labels: Vec::with_capacity(archive.len()),
            record_ids: Vec::with_capacity(archive.len()),
        })
        .collect();
    for (idx, entry) in archive.manifest.records.iter().enumerate() {
        let record = archive.record(idx)?;
        for d in &mut domains {
            let x = extract_features(&record, d.story, config.length, config.rate)?;
            d.features.extend(x.iter().flatten());
            let summary = peak_drift_ratio(&record, d.story, building.heights[d.story - 1])?;
            d.labels.push(classify_drift(summary.drift_ratio)?);
            d.record_ids.push(entry.record_id.clone());
        }
    }
    Ok(domains)
}

/// Record-level train/val/test assignment, shared by every story of the
/// source building so that no record leaks across splits.
fn assign_splits(n_records: usize, config: &DatasetConfig, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n_records).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x0005_9117));
    let n_val = (config.val_fraction * n_records as f64).round() as usize;
    let n_test = (config.test_fraction * n_records as f64).round() as usize;
    let mut splits = vec![Split::Train; n_records];
    for (rank, &idx) in order.iter().enumerate() {
        if rank < n_val {
            splits[idx] = Split::Val;
        } else if rank < n_val + n_test {
            splits[idx] = Split::Test;
        }
    }
    splits
}

/// Pooled per-channel mean and population standard deviation over the
/// source training split.
fn pooled_stats(domains: &[RawDomain], splits: &[Split], length: usize) -> ChannelStats {
    let mut sum = [0.0; N_CHANNELS];
    let mut count = 0usize;
    let train_rows = |d: &'_ RawDomain| {
        let size = length * N_CHANNELS;
        (0..d.record_ids.len())
            .filter(|&i| splits[i] == Split::Train)
            .flat_map(move |i| (0..length).map(move |t| i * size + t * N_CHANNELS))
    };
    for d in domains {
        for row in train_rows(d) {
            for c in 0..N_CHANNELS {
                sum[c] += d.features[row + c];
            }
            count += 1;
        }
    }
    let mean = sum.map(|s| s / count as f64);
    let mut sq = [0.0; N_CHANNELS];
    for d in domains {
        for row in train_rows(d) {
            for c in 0..N_CHANNELS {
                let e = d.features[row + c] - mean[c];
                sq[c] += e * e;
            }
        }
    }
    let std = sq.map(|s| (s / count as f64).sqrt().max(f64::MIN_POSITIVE));
    ChannelStats { mean, std }
}

fn finish(raw: RawDomain, building_id: &str, length: usize, splits: Vec<Split>, stats: ChannelStats, labeled: bool) -> DomainDataset {
    let features = raw
        .features
        .chunks_exact(N_CHANNELS)
        .flat_map(|row| (0..N_CHANNELS).map(move |c| ((row[c] - stats.mean[c]) / stats.std[c]) as f32))
        .collect();
    DomainDataset {
        domain_id: domain_id(building_id, raw.story),
        physics: raw.physics,
        story: raw.story,
        length,
        features,
        labels: labeled.then_some(raw.labels),
        record_ids: raw.record_ids,
        splits,
        stats,
    }
}

/// Assembles the labeled source domains and the unlabeled target domain.
/// Target labels are returned separately for evaluation only.
pub fn build_domains(
    source: &Archive,
    target: &Archive,
    config: &DatasetConfig,
    seed: u64,
    config_hash: &str,
) -> Result<(DatasetBundle, TargetLabels)> {
    if config.source_stories.is_empty() {
        return Err(Error::invalid("at least one source story is required"));
    }
    if !(config.val_fraction >= 0.0 && config.test_fraction >= 0.0 && config.val_fraction + config.test_fraction < 1.0) {
        return Err(Error::invalid("split fractions must be non-negative and leave a training split"));
    }
    let raw_sources = extract_domains(source, &config.source_stories, config)?;
    let raw_target = extract_domains(target, &[config.target_story], config)?
        .pop()
        .expect("one target story requested");

    let source_id = &source.manifest.building.id;
    for d in &raw_sources {
        for class in DamageClass::ALL {
            if !d.labels.contains(&class) {
                return Err(Error::Calibration {
                    class: class.code(),
                    domain: domain_id(source_id, d.story),
                });
            }
        }
    }

    let splits = assign_splits(source.len(), config, seed);
    let stats = if config.standardize {
        pooled_stats(&raw_sources, &splits, config.length)
    } else {
        ChannelStats::identity()
    };

    let target_labels = TargetLabels {
        domain_id: domain_id(&target.manifest.building.id, raw_target.story),
        labels: raw_target.labels.clone(),
    };
    let target_splits = vec![Split::Train; raw_target.record_ids.len()];
    let target_ds = finish(
        raw_target,
        &target.manifest.building.id,
        config.length,
        target_splits,
        stats,
        false,
    );
    let sources = raw_sources
        .into_iter()
        .map(|d| finish(d, source_id, config.length, splits.clone(), stats, true))
        .collect();

    Ok((
        DatasetBundle {
            config_hash: config_hash.into(),
            length: config.length,
            rate: config.rate,
            stats,
            sources,
            target: target_ds,
        },
        target_labels,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(labels: &[u8]) -> DomainDataset {
        DomainDataset {
            domain_id: "d".into(),
            physics: 1.0,
            story: 1,
            length: 1,
            features: vec![0.0; labels.len() * 4],
            labels: Some(labels.iter().map(|&c| DamageClass::from_code(c).unwrap()).collect()),
            record_ids: (0..labels.len()).map(|i| i.to_string()).collect(),
            splits: vec![Split::Train; labels.len()],
            stats: ChannelStats::identity(),
        }
    }

    #[test]
    fn distribution_counts() {
        assert_eq!(class_distribution(&labeled(&[1, 1, 2, 3])).unwrap(), [0.5, 0.25, 0.25]);
        assert_eq!(class_distribution(&labeled(&[2, 2])).unwrap(), [0.0, 1.0, 0.0]);
        let mut unlabeled = labeled(&[1]);
        unlabeled.labels = None;
        assert!(class_distribution(&unlabeled).is_err());
    }

    #[test]
    fn splits_partition_records() {
        let splits = assign_splits(600, &DatasetConfig::default(), 7);
        let count = |s| splits.iter().filter(|&&x| x == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (420, 90, 90));
        assert_eq!(splits, assign_splits(600, &DatasetConfig::default(), 7));
    }

    #[test]
    fn subset_keeps_alignment() {
        let mut d = labeled(&[1, 2, 3]);
        d.features = (0..12).map(|v| v as f32).collect();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.features, vec![8.0, 9.0, 10.0, 11.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.labels.unwrap(), vec![DamageClass::Severe, DamageClass::Slight]);
        assert_eq!(s.record_ids, vec!["2", "0"]);
    }
}
