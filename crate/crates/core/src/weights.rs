//! Gaussian-kernel similarity between source and target physics descriptors
//! and the normalized per-source loss weights derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel width reproducing the published source similarities for relative
/// heights {1/3, 2/3, 1} against a target at 1/5.
pub const DEFAULT_SIGMA: f64 = 0.5402;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    Fixed,
    SourceStdPopulation,
    SourceStdSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub mode: SigmaMode,
    /// Used by [`SigmaMode::Fixed`] only.
    pub sigma: f64,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        Self {
            mode: SigmaMode::Fixed,
            sigma: DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceWeightSet {
    pub source_physics: Vec<f64>,
    pub target_physics: f64,
    pub sigma: f64,
    pub sigma_mode: SigmaMode,
    pub raw_similarity: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn gaussian_similarity(s: f64, t: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma {sigma} must be positive")));
    }
    let d = s - t;
    Ok((-(d * d) / (2.0 * sigma * sigma)).exp())
}

pub fn source_sigma(source_physics: &[f64], config: &SigmaConfig) -> Result<f64> {
    let sample = match config.mode {
        SigmaMode::Fixed => {
            if !(config.sigma > 0.0 && config.sigma.is_finite()) {
                return Err(Error::invalid(format!("fixed sigma {} must be positive", config.sigma)));
            }
            return Ok(config.sigma);
        }
        SigmaMode::SourceStdPopulation => false,
        SigmaMode::SourceStdSample => true,
    };
    let n = source_physics.len();
    if n < 2 {
        return Err(Error::DegenerateSigma(format!(
            "standard deviation needs at least two sources, got {n}"
        )));
    }
    let mean = source_physics.iter().sum::<f64>() / n as f64;
    let ss: f64 = source_physics.iter().map(|s| (s - mean).powi(2)).sum();
    let denom = if sample { n - 1 } else { n } as f64;
    let sigma = (ss / denom).sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateSigma("all source physics descriptors are equal".into()));
    }
    Ok(sigma)
}

pub fn compute_weights(source_physics: &[f64], target_physics: f64, config: &SigmaConfig) -> Result<SourceWeightSet> {
    if source_physics.is_empty() {
        return Err(Error::invalid("at least one source is required"));
    }
    let sigma = source_sigma(source_physics, config)?;
    let raw_similarity = source_physics
        .iter()
        .map(|&s| gaussian_similarity(s, target_physics, sigma))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = raw_similarity.iter().sum();
    let weights = raw_similarity.iter().map(|s| s / total).collect();
    Ok(SourceWeightSet {
        source_physics: source_physics.to_vec(),
        target_physics,
        sigma,
        sigma_mode: config.mode,
        raw_similarity,
        weights,
    })
}
