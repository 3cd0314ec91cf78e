#![allow(dead_code)]
pub mod labeling;
pub mod physics;

use drift_adapt::dataset::{DamageClass, N_CHANNELS};
use drift_adapt::net::{evaluate_losses, gradients, init_params, Batch, ConvBlock, NetworkConfig, Objective, ParameterStore, SourceBatch};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// L = 64, conv channels 4/8, H = 8.
pub fn tiny_config() -> NetworkConfig {
    NetworkConfig {
        length: 64,
        conv: vec![ConvBlock { kernel: 3, channels: 4, pool: 2 }, ConvBlock { kernel: 3, channels: 8, pool: 2 }],
        hidden: 8,
        classifier_hidden: 8,
        discriminator_hidden: 8,
        n_sources: 3,
    }
}

pub fn random_inputs(config: &NetworkConfig, count: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..config.length * N_CHANNELS).map(|_| rng.random_range(-1.5f32..1.5)).collect())
        .collect()
}

/// Two labeled samples per source and three target samples.
pub fn batch_of(xs: &[Vec<f32>]) -> Batch<'_> {
    let cls = DamageClass::ALL;
    Batch {
        sources: (0..3)
            .map(|i| SourceBatch {
                x: vec![&xs[2 * i][..], &xs[2 * i + 1][..]],
                labels: vec![cls[i], cls[(i + 2) % 3]],
            })
            .collect(),
        target: xs[6..9].iter().map(|x| &x[..]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
    Classification,
    Domain(usize),
}

fn objective(scalar: Scalar) -> Objective {
    match scalar {
        Scalar::Classification => Objective { class_weights: vec![0.5, 0.3, 0.2], domain_weights: vec![0.0; 3], lambda: 0.0 },
        Scalar::Domain(i) => {
            let mut w = vec![0.0; 3];
            w[i] = 1.0;
            Objective { class_weights: vec![0.0; 3], domain_weights: w, lambda: 1.0 }
        }
    }
}

fn value(config: &NetworkConfig, p: &ParameterStore, batch: &Batch<'_>, scalar: Scalar) -> f64 {
    let r = evaluate_losses(config, p, batch, &objective(scalar)).unwrap();
    match scalar {
        Scalar::Classification => r.clv,
        Scalar::Domain(i) => r.domain[i],
    }
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps round-off on vanishing
/// gradients from dominating.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error per parameter array between reverse-mode gradients
/// and central differences with step `h`. Extractor gradients of a domain
/// loss come back through the reversal layer at λ = 1, so they are compared
/// against the negated finite difference.
pub fn gradient_check(config: &NetworkConfig, params: &ParameterStore, batch: &Batch<'_>, scalar: Scalar, h: f64) -> Vec<(String, f64)> {
    let (grad, _) = gradients(config, params, batch, &objective(scalar)).unwrap();
    let n_theta = params.theta.len();
    let mut out = Vec::new();
    let mut probe = params.clone();
    for (k, g) in grad.iter().enumerate() {
        let sign = if k < n_theta && matches!(scalar, Scalar::Domain(_)) { -1.0 } else { 1.0 };
        let mut worst = 0.0f64;
        for j in 0..g.data.len() {
            let orig = probe.iter().nth(k).unwrap().data[j];
            probe.iter_mut().nth(k).unwrap().data[j] = orig + h;
            let up = value(config, &probe, batch, scalar);
            probe.iter_mut().nth(k).unwrap().data[j] = orig - h;
            let down = value(config, &probe, batch, scalar);
            probe.iter_mut().nth(k).unwrap().data[j] = orig;
            let fd = sign * (up - down) / (2.0 * h);
            worst = worst.max(rel_error(g.data[j], fd));
        }
        out.push((g.name.clone(), worst));
    }
    out
}

pub fn seeded_params(config: &NetworkConfig, seed: u64) -> ParameterStore {
    let mut p = init_params(config, seed).unwrap();
    // nonzero biases so every path is exercised
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for a in p.iter_mut().filter(|a| a.name.ends_with(".bias")) {
        for v in &mut a.data {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    p
}
