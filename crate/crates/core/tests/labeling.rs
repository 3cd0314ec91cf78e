mod common;

use common::labeling::brute_force_agreement;
use drift_adapt::dataset::{classify_drift, DamageClass};

#[test]
fn peak_drift_matches_brute_force_scan() {
    assert_eq!(brute_force_agreement(), 100);
}

#[test]
fn class_boundaries() {
    assert_eq!(classify_drift(0.0).unwrap(), DamageClass::Slight);
    assert_eq!(classify_drift(0.009_999_999).unwrap(), DamageClass::Slight);
    assert_eq!(classify_drift(0.01).unwrap().code(), 2);
    assert_eq!(classify_drift(0.019_999_999).unwrap(), DamageClass::Moderate);
    assert_eq!(classify_drift(0.02).unwrap().code(), 3);
    assert!(classify_drift(-1e-9).is_err());
    assert!(classify_drift(f64::NAN).is_err());
}
