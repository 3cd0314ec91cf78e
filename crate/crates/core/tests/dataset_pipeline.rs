use drift_adapt::dataset::{build_domains, extract_features, persist_roundtrip, DatasetConfig, Split, N_CHANNELS};
use drift_adapt::sim::{run_campaign, Archive, BuildingSpec, CampaignConfig};

fn small_campaign() -> CampaignConfig {
    CampaignConfig {
        n_motions: 12,
        scale_factors: vec![3.0, 8.0, 15.0, 24.0],
        duration: 22.0,
        ..Default::default()
    }
}

fn config() -> DatasetConfig {
    DatasetConfig {
        length: 1024,
        ..Default::default()
    }
}

fn archives(dir: &std::path::Path) -> (Archive, Archive) {
    run_campaign(&BuildingSpec::three_story(), &small_campaign(), 1, "h", &dir.join("s")).unwrap();
    run_campaign(&BuildingSpec::five_story(), &small_campaign(), 2, "h", &dir.join("t")).unwrap();
    (Archive::open(&dir.join("s")).unwrap(), Archive::open(&dir.join("t")).unwrap())
}

#[test]
fn standardization_uses_pooled_source_training_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = archives(dir.path());
    let (bundle, labels) = build_domains(&src, &tgt, &config(), 3, "h").unwrap();
    assert_eq!(bundle.sources.len(), 3);
    assert_eq!(labels.labels.len(), bundle.target.len());
    assert!(bundle.target.labels.is_none());

    // pooled train-split moments of the stored features are 0 and 1
    let mut sum = [0.0f64; N_CHANNELS];
    let mut sq = [0.0f64; N_CHANNELS];
    let mut n = 0usize;
    for s in &bundle.sources {
        for i in s.indices(Split::Train) {
            for row in s.x(i).chunks_exact(N_CHANNELS) {
                for c in 0..N_CHANNELS {
                    sum[c] += f64::from(row[c]);
                    sq[c] += f64::from(row[c]).powi(2);
                }
                n += 1;
            }
        }
    }
    for c in 0..N_CHANNELS {
        let mean = sum[c] / n as f64;
        let var = sq[c] / n as f64 - mean * mean;
        assert!(mean.abs() < 1e-4, "channel {c} mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "channel {c} variance {var}");
    }

    // target features use the same source statistics
    let record = tgt.record(5).unwrap();
    let raw = extract_features(&record, 1, 1024, 50.0).unwrap();
    let stats = bundle.stats;
    for (t, row) in raw.iter().enumerate().step_by(37) {
        for c in 0..N_CHANNELS {
            let expected = ((row[c] - stats.mean[c]) / stats.std[c]) as f32;
            assert_eq!(bundle.target.x(5)[t * N_CHANNELS + c], expected);
        }
    }
}

#[test]
fn splits_are_shared_by_record_across_source_stories() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = archives(dir.path());
    let (bundle, _) = build_domains(&src, &tgt, &config(), 3, "h").unwrap();
    let first = &bundle.sources[0];
    for s in &bundle.sources[1..] {
        assert_eq!(s.splits, first.splits);
        assert_eq!(s.record_ids, first.record_ids);
    }
    let n = first.len();
    let val = first.indices(Split::Val).len();
    let test = first.indices(Split::Test).len();
    assert_eq!(val, (0.15 * n as f64).round() as usize);
    assert_eq!(test, (0.15 * n as f64).round() as usize);
}

#[test]
fn persisted_dataset_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = archives(dir.path());
    let (bundle, labels) = build_domains(&src, &tgt, &config(), 3, "h").unwrap();
    let (loaded, loaded_labels) = persist_roundtrip(&bundle, Some(&labels), &dir.path().join("ds")).unwrap();
    assert_eq!(loaded, bundle);
    assert_eq!(loaded_labels.unwrap(), labels);
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for (a, b) in loaded.sources.iter().zip(&bundle.sources) {
        assert_eq!(bits(&a.features), bits(&b.features));
    }
}
