//! Feature/label extraction and per-story domain datasets.

mod domain;
mod features;
mod labels;
mod store;

pub use domain::{
    build_domains, class_distribution, domain_id, ChannelStats, DatasetBundle, DatasetConfig, DomainDataset,
    FeatureSample, Split, TargetLabels,
};
pub use features::{extract_features, N_CHANNELS};
pub use labels::{classify_drift, peak_drift_ratio, DamageClass, StoryDriftSummary};
pub use store::{
    load_dataset, load_eval_labels, load_manifest, persist_roundtrip, save_dataset, BlobEntry, DatasetManifest,
    DATASET_FORMAT,
};
