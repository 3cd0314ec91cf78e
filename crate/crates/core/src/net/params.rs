use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::N_CHANNELS;
use crate::error::{Error, Result};

/// Number of damage classes predicted by the classifier head.
pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub kernel: usize,
    pub channels: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Input length L.
    pub length: usize,
    pub conv: Vec<ConvBlock>,
    /// Recurrent hidden size per direction; the latent size is twice this.
    pub hidden: usize,
    pub classifier_hidden: usize,
    pub discriminator_hidden: usize,
    pub n_sources: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            length: 2048,
            conv: vec![
                ConvBlock { kernel: 7, channels: 16, pool: 4 },
                ConvBlock { kernel: 5, channels: 32, pool: 4 },
                ConvBlock { kernel: 3, channels: 64, pool: 4 },
            ],
            hidden: 64,
            classifier_hidden: 64,
            discriminator_hidden: 64,
            n_sources: 3,
        }
    }
}

impl NetworkConfig {
    pub fn latent_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Sequence length entering the recurrent stage.
    pub fn recurrent_steps(&self) -> usize {
        self.conv.iter().fold(self.length, |t, b| t / b.pool.max(1))
    }

    pub fn recurrent_input(&self) -> usize {
        self.conv.last().map_or(N_CHANNELS, |b| b.channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.classifier_hidden == 0 || self.discriminator_hidden == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        for (i, b) in self.conv.iter().enumerate() {
            if b.kernel == 0 || b.kernel % 2 == 0 || b.channels == 0 || b.pool == 0 {
                return Err(Error::invalid(format!(
                    "conv block {i}: kernel must be odd and positive, channels and pool positive"
                )));
            }
        }
        if self.recurrent_steps() < 4 {
            return Err(Error::invalid(format!(
                "conv/pool geometry leaves {} recurrent steps; at least 4 required",
                self.recurrent_steps()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; len],
        }
    }
}

/// Parameters of the extractor (`theta`), classifier (`phi`) and one
/// discriminator per source (`psi`). A gradient store has the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    pub theta: Vec<Param>,
    pub phi: Vec<Param>,
    pub psi: Vec<Vec<Param>>,
}

/// Index of each extractor array inside `theta`.
pub(crate) struct ThetaLayout {
    pub conv: Vec<(usize, usize)>,
    /// (w_ih, w_hh, bias) per direction, forward first.
    pub lstm: [(usize, usize, usize); 2],
}

impl ThetaLayout {
    pub fn new(config: &NetworkConfig) -> Self {
        let conv: Vec<(usize, usize)> = (0..config.conv.len()).map(|b| (2 * b, 2 * b + 1)).collect();
        let base = 2 * config.conv.len();
        Self {
            conv,
            lstm: [(base, base + 1, base + 2), (base + 3, base + 4, base + 5)],
        }
    }
}

/// Index layout shared by the dense heads: hidden weight, hidden bias,
/// output weight, output bias.
pub(crate) const HEAD_HIDDEN_W: usize = 0;
pub(crate) const HEAD_HIDDEN_B: usize = 1;
pub(crate) const HEAD_OUT_W: usize = 2;
pub(crate) const HEAD_OUT_B: usize = 3;

fn head(prefix: &str, input: usize, hidden: usize, out: usize) -> Vec<Param> {
    vec![
        Param::zeros(format!("{prefix}.hidden.weight"), vec![hidden, input]),
        Param::zeros(format!("{prefix}.hidden.bias"), vec![hidden]),
        Param::zeros(format!("{prefix}.out.weight"), vec![out, hidden]),
        Param::zeros(format!("{prefix}.out.bias"), vec![out]),
    ]
}

impl ParameterStore {
    /// All-zero store with the shapes implied by `config`.
    pub fn zeros(config: &NetworkConfig) -> Self {
        let mut theta = Vec::new();
        let mut in_ch = N_CHANNELS;
        for (b, block) in config.conv.iter().enumerate() {
            theta.push(Param::zeros(format!("conv{b}.weight"), vec![block.channels, in_ch, block.kernel]));
            theta.push(Param::zeros(format!("conv{b}.bias"), vec![block.channels]));
            in_ch = block.channels;
        }
        let h = config.hidden;
        for dir in ["fwd", "bwd"] {
            theta.push(Param::zeros(format!("lstm.{dir}.w_ih"), vec![4 * h, in_ch]));
            theta.push(Param::zeros(format!("lstm.{dir}.w_hh"), vec![4 * h, h]));
            theta.push(Param::zeros(format!("lstm.{dir}.bias"), vec![4 * h]));
        }
        let d = config.latent_dim();
        Self {
            theta,
            phi: head("classifier", d, config.classifier_hidden, N_CLASSES),
            psi: (0..config.n_sources)
                .map(|i| head(&format!("discriminator{i}"), d, config.discriminator_hidden, 1))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |g: &Vec<Param>| -> Vec<Param> {
            g.iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: vec![0.0; p.data.len()],
                })
                .collect()
        };
        Self {
            theta: z(&self.theta),
            phi: z(&self.phi),
            psi: self.psi.iter().map(z).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.theta.iter().chain(&self.phi).chain(self.psi.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.theta
            .iter_mut()
            .chain(self.phi.iter_mut())
            .chain(self.psi.iter_mut().flatten())
    }

    pub fn n_values(&self) -> usize {
        self.iter().map(|p| p.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    /// True when every array has the same name and shape as in `other`.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.psi.len() == other.psi.len()
            && self.iter().count() == other.iter().count()
            && self.iter().zip(other.iter()).all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.iter().find(|p| p.name == name)
    }
}

/// Deterministic initialization: fan-in-scaled uniform weights (He bounds for
/// layers followed by a rectifier, `1/sqrt(fan_in)` otherwise), zero biases,
/// and +1 on the recurrent forget-gate biases.
pub fn init_params(config: &NetworkConfig, seed: u64) -> Result<ParameterStore> {
    config.validate()?;
    let mut store = ParameterStore::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.hidden;
    for p in store.iter_mut() {
        if p.name.ends_with(".bias") {
            if p.name.starts_with("lstm.") {
                p.data[h..2 * h].fill(1.0);
            }
            continue;
        }
        let fan_in: usize = p.shape[1..].iter().product();
        let rectified = p.name.starts_with("conv") || p.name.contains(".hidden.");
        let bound = if rectified {
            (6.0 / fan_in as f64).sqrt()
        } else {
            1.0 / (fan_in as f64).sqrt()
        };
        for v in &mut p.data {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let c = NetworkConfig::default();
        c.validate().unwrap();
        assert_eq!(c.recurrent_steps(), 32);
        assert_eq!(c.latent_dim(), 128);
    }

    #[test]
    fn rejects_short_recurrent_sequence() {
        let c = NetworkConfig {
            length: 48,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(init_params(&c, 1).is_err());
    }

    #[test]
    fn init_is_deterministic_and_seeded() {
        let c = NetworkConfig::default();
        let a = init_params(&c, 5).unwrap();
        assert_eq!(a, init_params(&c, 5).unwrap());
        assert_ne!(a, init_params(&c, 6).unwrap());
        assert!(a.same_layout(&ParameterStore::zeros(&c)));
    }

    #[test]
    fn biases_zero_except_forget_gates() {
        let c = NetworkConfig::default();
        let p = init_params(&c, 1).unwrap();
        for param in p.iter().filter(|p| p.name.ends_with(".bias")) {
            for (i, v) in param.data.iter().enumerate() {
                let forget = param.name.starts_with("lstm.") && (64..128).contains(&i);
                assert_eq!(*v, if forget { 1.0 } else { 0.0 }, "{} [{i}]", param.name);
            }
        }
    }
}
