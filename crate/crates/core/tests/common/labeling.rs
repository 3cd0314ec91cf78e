use drift_adapt::dataset::peak_drift_ratio;
use drift_adapt::sim::{scale_motion, simulate_response, synthesize_motion, BuildingSpec, SpectralParams};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws 100 seeded records and compares against a direct scan.
pub fn brute_force_agreement() -> usize {
    let b = BuildingSpec::three_story();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0;
    for k in 0..100u64 {
        let params = SpectralParams {
            dominant_freq_hz: rng.random_range(0.8..6.0),
            damping: rng.random_range(0.2..0.8),
            pga: 1.0,
        };
        let m = synthesize_motion(1000 + k, 6.0, 0.01, &params).unwrap();
        let rec = simulate_response(&b, &scale_motion(&m, rng.random_range(1.0..25.0)).unwrap()).unwrap();
        let story = 1 + (k as usize % 3);
        let h = b.heights[story - 1];
        let mut peak = 0.0f64;
        for axis in [&rec.drift[story - 1].x, &rec.drift[story - 1].y] {
            for d in axis {
                if d.abs() > peak {
                    peak = d.abs();
                }
            }
        }
        let got = peak_drift_ratio(&rec, story, h).unwrap();
        if got.drift_ratio.to_bits() == (peak / h).to_bits() && got.delta_max.to_bits() == peak.to_bits() {
            agree += 1;
        }
    }
    agree
}
