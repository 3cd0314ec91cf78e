//! Browser bindings: source weighting and single-record building response.

use drift_adapt::dataset::{classify_drift, peak_drift_ratio};
use drift_adapt::sim::{scale_motion, simulate_response, synthesize_motion, BuildingSpec, SpectralParams};
use drift_adapt::weights::{compute_weights, SigmaConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Normalized source weights for a fixed kernel width, as JSON.
#[wasm_bindgen]
pub fn source_weights(source_physics: &[f64], target_physics: f64, sigma: f64) -> Result<String, JsError> {
    let config = SigmaConfig { sigma, ..Default::default() };
    let set = compute_weights(source_physics, target_physics, &config).map_err(js_err)?;
    serde_json::to_string(&set).map_err(js_err)
}

/// Weights over a log-spaced sigma grid, row-major `[n_sigma][n_sources]`.
#[wasm_bindgen]
pub fn weight_sweep(
    source_physics: &[f64],
    target_physics: f64,
    sigma_min: f64,
    sigma_max: f64,
    n_sigma: usize,
) -> Result<Vec<f64>, JsError> {
    if !(sigma_min > 0.0 && sigma_max > sigma_min && n_sigma >= 2) {
        return Err(JsError::new("need 0 < sigma_min < sigma_max and at least two points"));
    }
    let ratio = (sigma_max / sigma_min).ln();
    let mut out = Vec::with_capacity(n_sigma * source_physics.len());
    for k in 0..n_sigma {
        let sigma = sigma_min * (ratio * k as f64 / (n_sigma - 1) as f64).exp();
        let config = SigmaConfig { sigma, ..Default::default() };
        out.extend(compute_weights(source_physics, target_physics, &config).map_err(js_err)?.weights);
    }
    Ok(out)
}

#[derive(Serialize)]
struct StoryResult {
    story: usize,
    peak_ratio: f64,
    class: u8,
    drift_x: Vec<f32>,
}

#[derive(Serialize)]
struct Response {
    building: String,
    dt: f64,
    ground_x: Vec<f32>,
    stories: Vec<StoryResult>,
}

/// Synthesizes one ground motion with peak acceleration `pga` (m/s²), runs it
/// through a building and labels each story.
/// `building` is "3" or "5".
#[wasm_bindgen]
pub fn simulate_building(
    building: &str,
    seed: u64,
    dominant_freq_hz: f64,
    ground_damping: f64,
    pga: f64,
    duration: f64,
) -> Result<String, JsError> {
    let spec = match building {
        "3" => BuildingSpec::three_story(),
        "5" => BuildingSpec::five_story(),
        other => return Err(JsError::new(&format!("unknown building {other}"))),
    };
    let params = SpectralParams { dominant_freq_hz, damping: ground_damping, pga: 1.0 };
    let motion = synthesize_motion(seed, duration, 0.01, &params).map_err(js_err)?;
    let motion = scale_motion(&motion, pga).map_err(js_err)?;
    let record = simulate_response(&spec, &motion).map_err(js_err)?;
    let mut stories = Vec::with_capacity(spec.n_stories());
    for story in 1..=spec.n_stories() {
        let peak = peak_drift_ratio(&record, story, spec.heights[story - 1]).map_err(js_err)?;
        stories.push(StoryResult {
            story,
            peak_ratio: peak.drift_ratio,
            class: classify_drift(peak.drift_ratio).map_err(js_err)?.code(),
            drift_x: record.drift[story - 1].x.iter().map(|v| *v as f32).collect(),
        });
    }
    let response = Response {
        building: spec.id,
        dt: record.dt,
        ground_x: motion.accel_x.iter().map(|v| *v as f32).collect(),
        stories,
    };
    serde_json::to_string(&response).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rows_are_normalized() {
        let w = weight_sweep(&[0.3, 0.6, 0.9], 0.2, 0.1, 2.0, 5).unwrap();
        assert_eq!(w.len(), 15);
        for row in w.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // narrow kernels concentrate weight on the nearest source
        assert!(w[0] > w[12]);
    }

    #[test]
    fn simulation_labels_every_story() {
        let json = simulate_building("5", 4, 2.0, 0.4, 1.0, 10.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let stories = v["stories"].as_array().unwrap();
        assert_eq!(stories.len(), 5);
        for s in stories {
            assert!((1..=3).contains(&s["class"].as_u64().unwrap()));
            assert_eq!(s["drift_x"].as_array().unwrap().len(), v["ground_x"].as_array().unwrap().len());
        }
    }
}
