use serde::{Deserialize, Serialize};

use crate::dataset::DamageClass;
use crate::error::{Error, Result};
use crate::net::ClassPosterior;

/// Probabilities are clamped this far from 0 and 1 before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Weighted classification loss.
    pub clv: f64,
    /// Unweighted binary cross-entropy of each source discriminator.
    pub domain: Vec<f64>,
    /// Weighted sum of the domain losses.
    pub adv: f64,
    pub lambda: f64,
    /// `clv + lambda * adv`.
    pub total: f64,
    /// Set when any probability had to be clamped.
    pub clamped: bool,
}

impl LossBreakdown {
    pub fn new(clv: f64, domain: Vec<f64>, adv: f64, lambda: f64, clamped: bool) -> Self {
        Self {
            clv,
            domain,
            adv,
            lambda,
            total: clv + lambda * adv,
            clamped,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.clv.is_finite() {
            return Err(Error::Numeric { term: "classification loss".into() });
        }
        if let Some(i) = self.domain.iter().position(|d| !d.is_finite()) {
            return Err(Error::Numeric { term: format!("domain loss of source {i}") });
        }
        if !self.adv.is_finite() || !self.total.is_finite() {
            return Err(Error::Numeric { term: "adversarial loss".into() });
        }
        Ok(())
    }
}

fn neg_log(p: f64, clamped: &mut bool) -> f64 {
    if p < PROB_FLOOR {
        *clamped = true;
        -PROB_FLOOR.ln()
    } else {
        -p.ln()
    }
}

/// `Σ_i w_i · mean_{samples of source i} (−log p_true)`, with a flag set when
/// any true-class probability was clamped. Sources without samples add nothing.
pub fn classification_loss(
    posteriors: &[ClassPosterior],
    labels: &[DamageClass],
    domain_of_sample: &[usize],
    weights: &[f64],
) -> Result<(f64, bool)> {
    if posteriors.len() != labels.len() || labels.len() != domain_of_sample.len() {
        return Err(Error::invalid("posteriors, labels and domains must align"));
    }
    let mut sums = vec![0.0; weights.len()];
    let mut counts = vec![0usize; weights.len()];
    let mut clamped = false;
    for ((p, y), &dom) in posteriors.iter().zip(labels).zip(domain_of_sample) {
        if dom >= weights.len() {
            return Err(Error::invalid(format!("sample domain {dom} has no weight")));
        }
        sums[dom] += neg_log(p.p[y.index()], &mut clamped);
        counts[dom] += 1;
    }
    let loss = weights
        .iter()
        .zip(sums.iter().zip(&counts))
        .filter(|(_, (_, &n))| n > 0)
        .map(|(w, (s, &n))| w * s / n as f64)
        .sum();
    Ok((loss, clamped))
}

/// Scores of one discriminator on its own source (positive class) and on the
/// target (negative class).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscriminatorScores {
    pub on_source: Vec<f64>,
    pub on_target: Vec<f64>,
}

/// Per-source loss `mean(−log d) over S_i + mean(−log(1 − d)) over T`, and
/// their weighted sum.
pub fn adversarial_loss(scores: &[DiscriminatorScores], weights: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
    if scores.len() != weights.len() {
        return Err(Error::invalid("one weight per discriminator required"));
    }
    let mut clamped = false;
    let mut per_source = Vec::with_capacity(scores.len());
    for s in scores {
        let mut loss = 0.0;
        if !s.on_source.is_empty() {
            loss += s.on_source.iter().map(|d| neg_log(*d, &mut clamped)).sum::<f64>() / s.on_source.len() as f64;
        }
        if !s.on_target.is_empty() {
            loss += s.on_target.iter().map(|d| neg_log(1.0 - d, &mut clamped)).sum::<f64>() / s.on_target.len() as f64;
        }
        per_source.push(loss);
    }
    let adv = per_source.iter().zip(weights).map(|(l, w)| w * l).sum();
    Ok((per_source, adv, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn post(p: [f64; 3]) -> ClassPosterior {
        ClassPosterior { p }
    }

    #[test]
    fn classification_examples() {
        let (l, c) = classification_loss(&[post([0.0, 1.0, 0.0])], &[DamageClass::Moderate], &[0], &[1.0]).unwrap();
        assert_eq!((l, c), (0.0, false));
        let uniform = vec![post([1.0 / 3.0; 3]); 4];
        let labels = [DamageClass::Slight, DamageClass::Moderate, DamageClass::Severe, DamageClass::Slight];
        let (l, _) = classification_loss(&uniform, &labels, &[0, 0, 1, 2], &[0.5, 0.3, 0.2]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
        assert!((l - 1.09861).abs() < 1e-5);
        let (_, c) = classification_loss(&[post([1.0, 0.0, 0.0])], &[DamageClass::Severe], &[0], &[1.0]).unwrap();
        assert!(c);
    }

    #[test]
    fn weighted_combination() {
        // per-source mean cross-entropies (1, 2, 1)
        let p = |ce: f64| post([(-ce).exp(), 1.0 - (-ce).exp(), 0.0]);
        let (l, _) = classification_loss(
            &[p(1.0), p(2.0), p(0.5), p(1.5)],
            &[DamageClass::Slight; 4],
            &[0, 1, 2, 2],
            &[0.5, 0.3, 0.2],
        )
        .unwrap();
        assert!((l - 1.3).abs() < 1e-12);
    }

    #[test]
    fn adversarial_examples() {
        let half = DiscriminatorScores { on_source: vec![0.5; 4], on_target: vec![0.5; 4] };
        let w = [0.2, 0.3, 0.5];
        let (per, adv, _) = adversarial_loss(&[half.clone(), half.clone(), half.clone()], &w).unwrap();
        assert!((adv - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((adv - 1.38629).abs() < 1e-5);
        assert_eq!(per.len(), 3);

        let perfect = DiscriminatorScores { on_source: vec![1.0 - 1e-15; 2], on_target: vec![1e-15; 2] };
        let (_, adv, _) = adversarial_loss(&[perfect.clone()], &[1.0]).unwrap();
        assert!(adv < 1e-12);

        let (per, adv, _) = adversarial_loss(&[half, perfect.clone(), perfect], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(adv, per[0]);

        let saturated = DiscriminatorScores { on_source: vec![0.0], on_target: vec![1.0] };
        let (per, _, clamped) = adversarial_loss(&[saturated], &[1.0]).unwrap();
        assert!(clamped && per[0].is_finite());
    }

    proptest! {
        #[test]
        fn losses_are_linear_in_raw_weights(
            w in proptest::collection::vec(0.0f64..2.0, 3),
            scale in 0.1f64..5.0,
            seed in 0u64..1000,
        ) {
            let p = |k: u64| {
                let a = ((seed * 7 + k * 13) % 97) as f64 / 97.0 * 0.8 + 0.1;
                post([a, (1.0 - a) * 0.6, (1.0 - a) * 0.4])
            };
            let posts: Vec<_> = (0..6).map(p).collect();
            let labels: Vec<_> = (0..6).map(|i| DamageClass::from_index(i % 3).unwrap()).collect();
            let doms = [0, 1, 2, 0, 1, 2];
            let ws: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let (a, _) = classification_loss(&posts, &labels, &doms, &w).unwrap();
            let (b, _) = classification_loss(&posts, &labels, &doms, &ws).unwrap();
            prop_assert!((b - scale * a).abs() <= 1e-12 * b.abs().max(1.0));

            let scores: Vec<_> = (0..3).map(|i| DiscriminatorScores {
                on_source: vec![posts[i].p[0]],
                on_target: vec![posts[i + 3].p[1]],
            }).collect();
            let (_, a, _) = adversarial_loss(&scores, &w).unwrap();
            let (_, b, _) = adversarial_loss(&scores, &ws).unwrap();
            prop_assert!((b - scale * a).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
