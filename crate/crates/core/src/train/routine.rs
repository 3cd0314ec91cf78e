use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossBreakdown;
use super::optim::{clip_by_player, Adam};
use crate::dataset::{DamageClass, DomainDataset, Split};
use crate::error::{Error, Result};
use crate::net::{extract, gradients, init_params, predict, Batch, NetworkConfig, Objective, ParameterStore, SourceBatch};

/// `2 / (1 + exp(−10 p)) − 1` for training progress `p ∈ [0, 1]`.
pub fn lambda_schedule(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("progress {p} outside [0, 1]")));
    }
    Ok(2.0 / (1.0 + (-10.0 * p).exp()) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaSchedule {
    Ramp,
    Constant { value: f64 },
}

impl LambdaSchedule {
    pub fn at(&self, p: f64) -> Result<f64> {
        match *self {
            LambdaSchedule::Ramp => lambda_schedule(p),
            LambdaSchedule::Constant { value } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!("progress {p} outside [0, 1]")));
                }
                Ok(value)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Samples drawn from each domain per step.
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a source-validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub clip_norm: f64,
    /// Taken from the run seed, not from configuration files.
    #[serde(skip)]
    pub seed: u64,
    pub lambda: LambdaSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
            lambda: LambdaSchedule::Ramp,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip norm must be positive"));
        }
        if let LambdaSchedule::Constant { value } = self.lambda {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::invalid(format!("constant lambda {value} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// One optimizer update on a mini-batch holding every source and the target.
/// The loss weights scale both the classification and the domain terms.
/// Parameters are left untouched when the step fails.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    network: &NetworkConfig,
    params: &mut ParameterStore,
    optimizer: &mut Adam,
    batch: &Batch<'_>,
    weights: &[f64],
    lambda: f64,
    clip_norm: f64,
) -> Result<LossBreakdown> {
    let objective = Objective {
        class_weights: weights.to_vec(),
        domain_weights: weights.to_vec(),
        lambda,
    };
    let (mut grad, report) = gradients(network, params, batch, &objective)?;
    if !grad.is_finite() {
        return Err(Error::Numeric { term: "gradient".into() });
    }
    clip_by_player(&mut grad, clip_norm);
    optimizer.update(params, &grad);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    /// Value at the epoch's last step.
    pub lambda: f64,
    pub clv: f64,
    pub domain: Vec<f64>,
    pub adv: f64,
    pub total: f64,
    pub source_val_accuracy: f64,
    pub clamped_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_val_accuracy: f64,
    /// Epoch whose parameters were returned; 0 means the initialization.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
    pub steps: u64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    /// One JSON object per epoch, newline terminated.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_json_lines(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_lines()?).map_err(|e| Error::io(path, e))
    }
}

pub struct TrainingData<'a> {
    pub sources: Vec<&'a DomainDataset>,
    /// Unlabeled target; `None` trains on the sources alone.
    pub target: Option<&'a DomainDataset>,
}

/// Endless reshuffled pass over a fixed index pool with its own generator.
struct Stream {
    pool: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(pool: Vec<usize>, seed: u64, tag: u64) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        Self {
            pos: 0,
            order: Vec::new(),
            pool,
            rng,
        }
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order = self.pool.clone();
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

const TARGET_STREAM: u64 = 0xffff;

fn classify(network: &NetworkConfig, params: &ParameterStore, x: &[f32]) -> Result<DamageClass> {
    let z = extract(network, &params.theta, x)?;
    Ok(predict(&params.phi, &z)?.argmax())
}

/// Accuracy pooled over the validation splits of all sources.
fn source_val_accuracy(network: &NetworkConfig, params: &ParameterStore, sources: &[&DomainDataset]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for s in sources {
        let labels = s.labels.as_ref().expect("checked");
        for i in s.indices(Split::Val) {
            hit += usize::from(classify(network, params, s.x(i))? == labels[i]);
            total += 1;
        }
    }
    Ok(hit as f64 / total as f64)
}

fn check_data(network: &NetworkConfig, data: &TrainingData<'_>, weights: &[f64]) -> Result<()> {
    if data.sources.len() != network.n_sources || weights.len() != network.n_sources {
        return Err(Error::invalid(format!(
            "expected {} sources and weights, got {} and {}",
            network.n_sources,
            data.sources.len(),
            weights.len()
        )));
    }
    for s in &data.sources {
        if s.labels.is_none() {
            return Err(Error::invalid(format!("source {} is unlabeled", s.domain_id)));
        }
        if s.indices(Split::Train).is_empty() || s.indices(Split::Val).is_empty() {
            return Err(Error::invalid(format!("source {} needs training and validation samples", s.domain_id)));
        }
        if s.length != network.length {
            return Err(Error::invalid(format!("source {} has length {}, network expects {}", s.domain_id, s.length, network.length)));
        }
    }
    if let Some(t) = data.target {
        if t.is_empty() {
            return Err(Error::invalid(format!("target {} is empty", t.domain_id)));
        }
        if t.length != network.length {
            return Err(Error::invalid("target length does not match the network"));
        }
    }
    Ok(())
}

/// Adversarial training with early stopping on pooled source-validation
/// accuracy. Returns the best parameters seen (the initialization counts).
pub fn train(
    network: &NetworkConfig,
    data: &TrainingData<'_>,
    weights: &[f64],
    config: &TrainConfig,
) -> Result<(ParameterStore, TrainingLog)> {
    config.validate()?;
    network.validate()?;
    check_data(network, data, weights)?;
    let mut params = init_params(network, config.seed)?;
    let initial = source_val_accuracy(network, &params, &data.sources)?;
    let mut log = TrainingLog {
        initial_val_accuracy: initial,
        best_epoch: 0,
        best_val_accuracy: initial,
        stopped_early: false,
        steps: 0,
        epochs: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok((params, log));
    }

    let mut streams: Vec<Stream> = data
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| Stream::new(s.indices(Split::Train), config.seed, i as u64))
        .collect();
    let mut target_stream = data.target.map(|t| Stream::new((0..t.len()).collect(), config.seed, TARGET_STREAM));
    let largest = data.sources.iter().map(|s| s.indices(Split::Train).len()).max().unwrap_or(0);
    let steps_per_epoch = largest.div_ceil(config.batch_size).max(1);
    let total_steps = (steps_per_epoch * config.epochs) as f64;
    let mut optimizer = Adam::new(&params, config.learning_rate);
    let mut best = params.clone();
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        let n_src = data.sources.len();
        let mut sum = LossBreakdown::new(0.0, vec![0.0; n_src], 0.0, 0.0, false);
        let mut clamped_steps = 0;
        let mut lambda = 0.0;
        for _ in 0..steps_per_epoch {
            lambda = config.lambda.at(log.steps as f64 / total_steps)?;
            let picks: Vec<Vec<usize>> = streams.iter_mut().map(|s| s.take(config.batch_size)).collect();
            let batch = Batch {
                sources: data
                    .sources
                    .iter()
                    .zip(&picks)
                    .map(|(s, idx)| {
                        let labels = s.labels.as_ref().expect("checked");
                        SourceBatch {
                            x: idx.iter().map(|&i| s.x(i)).collect(),
                            labels: idx.iter().map(|&i| labels[i]).collect(),
                        }
                    })
                    .collect(),
                target: match (data.target, target_stream.as_mut()) {
                    (Some(t), Some(st)) => st.take(config.batch_size).into_iter().map(|i| t.x(i)).collect(),
                    _ => Vec::new(),
                },
            };
            let r = train_step(network, &mut params, &mut optimizer, &batch, weights, lambda, config.clip_norm)?;
            log.steps += 1;
            sum.clv += r.clv;
            sum.adv += r.adv;
            sum.total += r.total;
            for (a, b) in sum.domain.iter_mut().zip(&r.domain) {
                *a += b;
            }
            clamped_steps += usize::from(r.clamped);
        }
        let k = steps_per_epoch as f64;
        let acc = source_val_accuracy(network, &params, &data.sources)?;
        log.epochs.push(EpochRecord {
            epoch,
            steps: log.steps,
            lambda,
            clv: sum.clv / k,
            domain: sum.domain.iter().map(|d| d / k).collect(),
            adv: sum.adv / k,
            total: sum.total / k,
            source_val_accuracy: acc,
            clamped_steps,
        });
        if acc > log.best_val_accuracy {
            log.best_val_accuracy = acc;
            log.best_epoch = epoch;
            best.clone_from(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                log.stopped_early = epoch < config.epochs;
                break;
            }
        }
    }
    Ok((best, log))
}

/// Source-only training: no target data and no domain loss.
pub fn train_baseline(
    network: &NetworkConfig,
    sources: &[&DomainDataset],
    weights: &[f64],
    config: &TrainConfig,
) -> Result<(ParameterStore, TrainingLog)> {
    let config = TrainConfig {
        lambda: LambdaSchedule::Constant { value: 0.0 },
        ..config.clone()
    };
    train(
        network,
        &TrainingData {
            sources: sources.to_vec(),
            target: None,
        },
        weights,
        &config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ChannelStats, N_CHANNELS};
    use crate::net::{evaluate_losses, ConvBlock};
    use rand::RngExt;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            length: 32,
            conv: vec![ConvBlock { kernel: 3, channels: 4, pool: 2 }, ConvBlock { kernel: 3, channels: 8, pool: 2 }],
            hidden: 8,
            classifier_hidden: 8,
            discriminator_hidden: 8,
            n_sources: 3,
        }
    }

    /// Class `c` shifts every channel by `c − 1` (plus `shift`), so classes
    /// are linearly separable.
    fn toy(id: &str, n: usize, shift: f32, labeled: bool, seed: u64) -> DomainDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = 32;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = DamageClass::ALL[i % 3];
            for _ in 0..len * N_CHANNELS {
                features.push(c.index() as f32 - 1.0 + shift + rng.random_range(-0.3f32..0.3));
            }
            labels.push(c);
        }
        DomainDataset {
            domain_id: id.into(),
            physics: 0.5,
            story: 1,
            length: len,
            features,
            labels: labeled.then_some(labels),
            record_ids: (0..n).map(|i| format!("r{i}")).collect(),
            splits: (0..n).map(|i| if i % 5 == 4 { Split::Val } else { Split::Train }).collect(),
            stats: ChannelStats::identity(),
        }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lambda_schedule(0.0).unwrap(), 0.0);
        let half = 2.0 / (1.0 + (-5f64).exp()) - 1.0;
        assert!((lambda_schedule(0.5).unwrap() - half).abs() < 1e-15);
        assert!((half - 0.98661).abs() < 1e-5);
        assert!((lambda_schedule(1.0).unwrap() - 0.99991).abs() < 1e-5);
        assert!(lambda_schedule(1.01).is_err() && lambda_schedule(-0.1).is_err());
        for k in 0..=100 {
            let l = lambda_schedule(k as f64 / 100.0).unwrap();
            assert!((0.0..1.0).contains(&l));
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        let c = TrainConfig { lambda: LambdaSchedule::Constant { value: 1.0 }, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn classification_loss_halves_on_separable_toy() {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 30, 0.0, true, i)).collect();
        let weights = [0.5, 0.3, 0.2];
        let mut params = init_params(&net, 2).unwrap();
        let mut opt = Adam::new(&params, 1e-3);
        let full = |p: &ParameterStore| {
            let b = Batch {
                sources: srcs
                    .iter()
                    .map(|s| SourceBatch { x: (0..s.len()).map(|i| s.x(i)).collect(), labels: s.labels.clone().unwrap() })
                    .collect(),
                target: Vec::new(),
            };
            evaluate_losses(&net, p, &b, &Objective::classification_only(&weights)).unwrap().clv
        };
        let start = full(&params);
        let mut streams: Vec<Stream> = (0..3).map(|i| Stream::new((0..30).collect(), 9, i)).collect();
        for _ in 0..200 {
            let picks: Vec<Vec<usize>> = streams.iter_mut().map(|s| s.take(8)).collect();
            let batch = Batch {
                sources: srcs
                    .iter()
                    .zip(&picks)
                    .map(|(s, idx)| SourceBatch {
                        x: idx.iter().map(|&i| s.x(i)).collect(),
                        labels: idx.iter().map(|&i| s.labels.as_ref().unwrap()[i]).collect(),
                    })
                    .collect(),
                target: Vec::new(),
            };
            train_step(&net, &mut params, &mut opt, &batch, &weights, 0.0, 5.0).unwrap();
        }
        let end = full(&params);
        assert!(end <= 0.5 * start, "{start} -> {end}");
    }

    #[test]
    fn zero_lambda_step_matches_source_only_step() {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 12, 0.0, true, i)).collect();
        let tgt = toy("t", 12, 0.7, false, 7);
        fn labeled(s: &DomainDataset) -> SourceBatch<'_> {
            SourceBatch { x: (0..6).map(|i| s.x(i)).collect(), labels: s.labels.clone().unwrap()[..6].to_vec() }
        }
        let with_target = Batch { sources: srcs.iter().map(labeled).collect(), target: (0..6).map(|i| tgt.x(i)).collect() };
        let source_only = Batch { sources: srcs.iter().map(labeled).collect(), target: Vec::new() };
        let w = [0.5, 0.3, 0.2];
        let p0 = init_params(&net, 3).unwrap();
        let (mut a, mut b) = (p0.clone(), p0.clone());
        let (mut oa, mut ob) = (Adam::new(&p0, 1e-3), Adam::new(&p0, 1e-3));
        train_step(&net, &mut a, &mut oa, &with_target, &w, 0.0, 5.0).unwrap();
        train_step(&net, &mut b, &mut ob, &source_only, &w, 0.0, 5.0).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.phi, b.phi);
        assert_ne!(a.psi, b.psi);
    }

    fn run(target: bool, lambda: LambdaSchedule) -> (ParameterStore, TrainingLog) {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 20, 0.0, true, i)).collect();
        let tgt = toy("t", 15, 0.5, false, 9);
        let data = TrainingData { sources: srcs.iter().collect(), target: target.then_some(&tgt) };
        let cfg = TrainConfig { batch_size: 8, epochs: 4, patience: 0, seed: 5, lambda, ..Default::default() };
        train(&net, &data, &[0.5, 0.3, 0.2], &cfg).unwrap()
    }

    #[test]
    fn baseline_is_zero_lambda_training_without_target() {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 20, 0.0, true, i)).collect();
        let cfg = TrainConfig { batch_size: 8, epochs: 4, patience: 0, seed: 5, ..Default::default() };
        let (a, la) = train_baseline(&net, &srcs.iter().collect::<Vec<_>>(), &[0.5, 0.3, 0.2], &cfg).unwrap();
        let (b, lb) = run(false, LambdaSchedule::Constant { value: 0.0 });
        assert_eq!(a, b);
        assert_eq!(la, lb);
        // the target stream does not perturb the source streams
        let (c, _) = run(true, LambdaSchedule::Constant { value: 0.0 });
        assert_eq!((a.theta, a.phi), (c.theta, c.phi));
    }

    #[test]
    fn training_is_deterministic_and_logged() {
        let (a, la) = run(true, LambdaSchedule::Ramp);
        let (b, lb) = run(true, LambdaSchedule::Ramp);
        assert_eq!(a, b);
        assert_eq!(la.to_json_lines().unwrap(), lb.to_json_lines().unwrap());
        assert_eq!(la.epochs.len(), 4);
        assert_eq!(la.to_json_lines().unwrap().lines().count(), 4);
        for e in &la.epochs {
            assert!(e.clv.is_finite() && e.adv.is_finite() && e.domain.iter().all(|d| d.is_finite()));
        }
        assert!(la.epochs[3].lambda > la.epochs[0].lambda);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 10, 0.0, true, i)).collect();
        let cfg = TrainConfig { epochs: 0, seed: 4, ..Default::default() };
        let (p, log) = train_baseline(&net, &srcs.iter().collect::<Vec<_>>(), &[0.4, 0.3, 0.3], &cfg).unwrap();
        assert_eq!(p, init_params(&net, 4).unwrap());
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn rejects_empty_or_unlabeled_domains() {
        let net = tiny();
        let srcs: Vec<DomainDataset> = (0..3).map(|i| toy(&format!("s{i}"), 10, 0.0, true, i)).collect();
        let empty = toy("t", 0, 0.0, false, 1);
        let data = TrainingData { sources: srcs.iter().collect(), target: Some(&empty) };
        assert!(train(&net, &data, &[0.4, 0.3, 0.3], &TrainConfig::default()).is_err());
        let unl = toy("u", 10, 0.0, false, 1);
        let data = TrainingData { sources: vec![&srcs[0], &srcs[1], &unl], target: None };
        assert!(train(&net, &data, &[0.4, 0.3, 0.3], &TrainConfig::default()).is_err());
    }
}
