//! Pipeline configuration: one JSON document validated before any stage runs,
//! with `--set dot.path=value` overrides and a content hash naming the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::sim::{BuildingSpec, CampaignConfig};
use crate::train::TrainConfig;
use crate::weights::SigmaConfig;

pub const OUT_ENV: &str = "DRIFT_ADAPT_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub source_building: BuildingSpec,
    pub target_building: BuildingSpec,
    pub campaign: CampaignConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            source_building: BuildingSpec::three_story(),
            target_building: BuildingSpec::five_story(),
            campaign: CampaignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Output root; the `--out` flag and the environment take precedence in
    /// that order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub dataset: DatasetConfig,
    pub weights: SigmaConfig,
    pub network: NetworkConfig,
    pub training: TrainConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

fn field(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: path.into(),
        message: message.into(),
    }
}

impl PipelineConfig {
    /// Parses a config document, reporting the offending field on failure.
    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            field(&path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Value> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| field("<document>", format!("{}: {e}", path.display())))
    }

    /// Reads the file (or the defaults), applies overrides, validates.
    pub fn resolve(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut value = match path {
            Some(p) => Self::load(p)?,
            None => serde_json::to_value(Self::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut config = Self::from_value(value)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.training.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |name: &str, r: Result<()>| r.map_err(|e| field(name, e.to_string()));
        wrap("simulation.source_building", self.simulation.source_building.validate())?;
        wrap("simulation.target_building", self.simulation.target_building.validate())?;
        wrap("simulation.campaign", self.simulation.campaign.validate())?;
        wrap("network", self.network.validate())?;
        wrap("training", self.training.validate())?;
        let n_src = self.simulation.source_building.n_stories();
        if let Some(s) = self.dataset.source_stories.iter().find(|s| **s == 0 || **s > n_src) {
            return Err(field("dataset.source_stories", format!("story {s} outside 1..={n_src}")));
        }
        let n_tgt = self.simulation.target_building.n_stories();
        if self.dataset.target_story == 0 || self.dataset.target_story > n_tgt {
            return Err(field("dataset.target_story", format!("story outside 1..={n_tgt}")));
        }
        if self.network.length != self.dataset.length {
            return Err(field("network.length", "must equal dataset.length"));
        }
        if self.network.n_sources != self.dataset.source_stories.len() {
            return Err(field("network.n_sources", "must equal the number of source stories"));
        }
        if !(self.dataset.rate > 0.0) {
            return Err(field("dataset.rate", "must be positive"));
        }
        let sim_rate = 1.0 / self.simulation.campaign.dt;
        let factor = sim_rate / self.dataset.rate;
        if (factor - factor.round()).abs() > 1e-9 || factor < 1.0 {
            return Err(field("dataset.rate", "must divide the simulation sampling rate"));
        }
        if self.weights.mode == crate::weights::SigmaMode::Fixed && !(self.weights.sigma > 0.0) {
            return Err(field("weights.sigma", "must be positive"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything except the seed and the
    /// output paths.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("seed");
            map.remove("paths");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_root(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.paths.out.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// `<root>/run-<first 12 hash digits>-s<seed>`.
    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(format!("run-{}-s{}", &self.hash()[..12], self.seed))
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| field(assignment, "override must look like dot.path=value"))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(field(path, "empty path segment"));
    }
    let mut node = doc;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert((*key).into(), parsed);
                    return Ok(());
                }
                map.get_mut(*key)
                    .ok_or_else(|| field(&keys[..=depth].join("."), "no such section"))?
            }
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| field(&keys[..=depth].join("."), "expected an array index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(i)
                    .ok_or_else(|| field(&keys[..=depth].join("."), format!("index outside 0..{len}")))?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
            _ => return Err(field(&keys[..depth].join("."), "not a section")),
        };
    }
    unreachable!("loop returns on the last key")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(PipelineConfig::from_value(v).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_the_field() {
        let mut v = serde_json::to_value(PipelineConfig::default()).unwrap();
        v["training"]["momentum"] = Value::from(0.9);
        match PipelineConfig::from_value(v) {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "training.momentum");
                assert!(message.contains("momentum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides() {
        let c = PipelineConfig::resolve(
            None,
            &["training.epochs=3".into(), "simulation.campaign.scale_factors.0=2.5".into(), "weights.mode=source-std-sample".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(c.training.epochs, 3);
        assert_eq!(c.simulation.campaign.scale_factors[0], 2.5);
        assert_eq!(c.weights.mode, crate::weights::SigmaMode::SourceStdSample);
        assert_eq!((c.seed, c.training.seed), (9, 9));
        assert!(PipelineConfig::resolve(None, &["training.bogus=1".into()], None).is_err());
        assert!(PipelineConfig::resolve(None, &["nothing.here=1".into()], None).is_err());
        assert!(PipelineConfig::resolve(None, &["training.epochs".into()], None).is_err());
        assert!(matches!(
            PipelineConfig::resolve(None, &["network.length=1024".into()], None),
            Err(Error::Config { field, .. }) if field == "network.length"
        ));
    }

    #[test]
    fn hash_ignores_seed_and_paths_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.seed = 42;
        b.paths.out = Some("/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.training.learning_rate = 2e-3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let dir = b.run_dir(Path::new("/r"));
        assert!(dir.to_str().unwrap().ends_with("-s42"));
    }

    #[test]
    fn missing_file_is_missing_input() {
        assert!(matches!(
            PipelineConfig::resolve(Some(Path::new("/no/such/config.json")), &[], None),
            Err(Error::MissingInput(_))
        ));
    }
}
