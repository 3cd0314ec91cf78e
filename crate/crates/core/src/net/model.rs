use serde::{Deserialize, Serialize};

use super::layers::{
    conv_pool_backward, conv_pool_forward, head_backward, head_forward, lstm_backward, lstm_forward, sigmoid,
    HeadCache, LstmCache,
};
use super::params::{
    NetworkConfig, Param, ParameterStore, ThetaLayout, HEAD_HIDDEN_B, HEAD_HIDDEN_W, HEAD_OUT_B, HEAD_OUT_W, N_CLASSES,
};
use crate::dataset::{DamageClass, N_CHANNELS};
use crate::error::{Error, Result};
use crate::train::loss::{adversarial_loss, classification_loss, DiscriminatorScores, LossBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    pub p: [f64; N_CLASSES],
}

impl ClassPosterior {
    pub fn from_logits(logits: &[f64; N_CLASSES]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = logits.map(|l| (l - max).exp());
        let sum: f64 = e.iter().sum();
        Self { p: e.map(|v| v / sum) }
    }

    /// Most probable class; ties go to the lower class.
    pub fn argmax(&self) -> DamageClass {
        let mut best = 0;
        for j in 1..N_CLASSES {
            if self.p[j] > self.p[best] {
                best = j;
            }
        }
        DamageClass::from_index(best).expect("three classes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    /// Probability that the sample comes from the discriminator's source.
    pub d: f64,
}

impl DomainScore {
    /// Sigmoid of `a`, kept strictly inside (0, 1) even where `f64` would
    /// round to an endpoint.
    pub fn from_preactivation(a: f64) -> Self {
        let hi = 1.0 - f64::EPSILON / 2.0;
        Self {
            d: sigmoid(a).clamp(f64::MIN_POSITIVE, hi),
        }
    }
}

/// Identity in the forward pass.
pub fn grl_forward(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// Gradient reversal: returns `−λ · upstream`, elementwise.
pub fn grl_backward(upstream: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda {lambda} must be non-negative")));
    }
    Ok(upstream.iter().map(|g| -lambda * g).collect())
}

struct ConvCache {
    /// Input to the block, channel-major.
    input: Vec<f64>,
    pooled: Vec<f64>,
    argmax: Vec<u32>,
}

struct ExtractCache {
    conv: Vec<ConvCache>,
    /// Recurrent input, time-major.
    seq: Vec<f64>,
    lstm: [LstmCache; 2],
    z: Vec<f64>,
}

fn check_input(config: &NetworkConfig, x: &[f32]) -> Result<()> {
    if x.len() != config.length * N_CHANNELS {
        return Err(Error::invalid(format!(
            "input has {} values, expected {}×{}",
            x.len(),
            config.length,
            N_CHANNELS
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input contains non-finite values"));
    }
    Ok(())
}

fn check_theta(config: &NetworkConfig, theta: &[Param]) -> Result<()> {
    let expected = ParameterStore::zeros(config).theta;
    if theta.len() != expected.len() || theta.iter().zip(&expected).any(|(a, b)| a.shape != b.shape) {
        return Err(Error::invalid("extractor parameters do not match the network config"));
    }
    Ok(())
}

fn forward_extract(config: &NetworkConfig, layout: &ThetaLayout, theta: &[Param], x: &[f32]) -> ExtractCache {
    let l = config.length;
    // time-major [L][4] -> channel-major [4][L]
    let mut act = vec![0.0; N_CHANNELS * l];
    for t in 0..l {
        for c in 0..N_CHANNELS {
            act[c * l + t] = f64::from(x[t * N_CHANNELS + c]);
        }
    }
    let mut t_len = l;
    let mut cin = N_CHANNELS;
    let mut conv = Vec::with_capacity(config.conv.len());
    for (block, &(wi, bi)) in config.conv.iter().zip(&layout.conv) {
        let (pooled, argmax) = conv_pool_forward(
            &act,
            cin,
            t_len,
            &theta[wi].data,
            &theta[bi].data,
            block.channels,
            block.kernel,
            block.pool,
        );
        let input = std::mem::replace(&mut act, pooled.clone());
        conv.push(ConvCache { input, pooled, argmax });
        t_len /= block.pool;
        cin = block.channels;
    }
    let mut seq = vec![0.0; t_len * cin];
    for c in 0..cin {
        for t in 0..t_len {
            seq[t * cin + c] = act[c * t_len + t];
        }
    }
    let h = config.hidden;
    let run = |dir: usize| {
        let (wi, wh, b) = layout.lstm[dir];
        lstm_forward(&seq, t_len, cin, &theta[wi].data, &theta[wh].data, &theta[b].data, h, dir == 1)
    };
    let lstm = [run(0), run(1)];
    let mut z = Vec::with_capacity(2 * h);
    z.extend_from_slice(lstm[0].last_hidden(h));
    z.extend_from_slice(lstm[1].last_hidden(h));
    ExtractCache { conv, seq, lstm, z }
}

fn backward_extract(
    config: &NetworkConfig,
    layout: &ThetaLayout,
    theta: &[Param],
    cache: &ExtractCache,
    dz: &[f64],
    grad: &mut [Param],
) {
    let h = config.hidden;
    let t_len = config.recurrent_steps();
    let cin = config.recurrent_input();
    let mut dseq = vec![0.0; t_len * cin];
    for dir in 0..2 {
        let (wi, wh, b) = layout.lstm[dir];
        let (dw_ih, rest) = grad[wi..].split_first_mut().expect("layout");
        let (dw_hh, rest) = rest.split_first_mut().expect("layout");
        let db = &mut rest[b - wh - 1];
        lstm_backward(
            &cache.lstm[dir],
            &cache.seq,
            t_len,
            cin,
            &theta[wi].data,
            &theta[wh].data,
            h,
            &dz[dir * h..(dir + 1) * h],
            &mut dw_ih.data,
            &mut dw_hh.data,
            &mut db.data,
            &mut dseq,
        );
    }
    // time-major -> channel-major gradient on the last pooled activation
    let mut dact = vec![0.0; t_len * cin];
    for t in 0..t_len {
        for c in 0..cin {
            dact[c * t_len + t] = dseq[t * cin + c];
        }
    }
    let mut in_ch: Vec<usize> = vec![N_CHANNELS];
    in_ch.extend(config.conv.iter().map(|b| b.channels));
    let mut lengths = vec![config.length];
    for b in &config.conv {
        lengths.push(lengths.last().unwrap() / b.pool);
    }
    for (idx, block) in config.conv.iter().enumerate().rev() {
        let (wi, bi) = layout.conv[idx];
        let cc = &cache.conv[idx];
        let (cin_b, t_in) = (in_ch[idx], lengths[idx]);
        let mut dinput = if idx > 0 { Some(vec![0.0; cin_b * t_in]) } else { None };
        let (dw, db) = {
            let (left, right) = grad.split_at_mut(bi);
            (&mut left[wi].data, &mut right[0].data)
        };
        conv_pool_backward(
            &cc.input,
            cin_b,
            t_in,
            &theta[wi].data,
            block.channels,
            block.kernel,
            block.pool,
            &cc.pooled,
            &cc.argmax,
            &dact,
            dw,
            db,
            dinput.as_deref_mut(),
        );
        if let Some(d) = dinput {
            dact = d;
        }
    }
}

/// Latent vector of one `L × 4` sample.
pub fn extract(config: &NetworkConfig, theta: &[Param], x: &[f32]) -> Result<Vec<f64>> {
    check_theta(config, theta)?;
    check_input(config, x)?;
    Ok(forward_extract(config, &ThetaLayout::new(config), theta, x).z)
}

pub fn extract_batch(config: &NetworkConfig, theta: &[Param], xs: &[&[f32]]) -> Result<Vec<Vec<f64>>> {
    xs.iter().map(|x| extract(config, theta, x)).collect()
}

fn check_head(params: &[Param], d: usize, outputs: usize) -> Result<()> {
    let ok = params.len() == 4
        && params[HEAD_HIDDEN_W].shape.len() == 2
        && params[HEAD_HIDDEN_W].shape[1] == d
        && params[HEAD_OUT_W].shape[0] == outputs
        && params[HEAD_HIDDEN_B].shape == [params[HEAD_HIDDEN_W].shape[0]]
        && params[HEAD_OUT_B].shape == [outputs];
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("head parameters do not accept a {d}-dimensional latent")))
    }
}

fn run_head(params: &[Param], z: &[f64]) -> HeadCache {
    head_forward(
        z,
        &params[HEAD_HIDDEN_W].data,
        &params[HEAD_HIDDEN_B].data,
        &params[HEAD_OUT_W].data,
        &params[HEAD_OUT_B].data,
    )
}

fn head_grad(params: &[Param], z: &[f64], cache: &HeadCache, dout: &[f64], grad: &mut [Param]) -> Vec<f64> {
    let [dw1, db1, dw2, db2] = grad else {
        unreachable!("heads have four arrays")
    };
    head_backward(
        z,
        cache,
        &params[HEAD_HIDDEN_W].data,
        &params[HEAD_OUT_W].data,
        dout,
        &mut dw1.data,
        &mut db1.data,
        &mut dw2.data,
        &mut db2.data,
    )
}

pub fn classifier_logits(phi: &[Param], z: &[f64]) -> Result<[f64; N_CLASSES]> {
    check_head(phi, z.len(), N_CLASSES)?;
    let out = run_head(phi, z).out;
    Ok([out[0], out[1], out[2]])
}

pub fn predict(phi: &[Param], z: &[f64]) -> Result<ClassPosterior> {
    Ok(ClassPosterior::from_logits(&classifier_logits(phi, z)?))
}

pub fn discriminate(psi: &[Param], z: &[f64]) -> Result<DomainScore> {
    check_head(psi, z.len(), 1)?;
    Ok(DomainScore::from_preactivation(run_head(psi, z).out[0]))
}

/// Labeled samples of one source domain.
#[derive(Debug, Clone, Default)]
pub struct SourceBatch<'a> {
    pub x: Vec<&'a [f32]>,
    pub labels: Vec<DamageClass>,
}

#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub sources: Vec<SourceBatch<'a>>,
    pub target: Vec<&'a [f32]>,
}

/// Scalar objective whose gradient [`gradients`] returns.
///
/// The classifier and extractor receive the gradient of
/// `Σ class_weights[i]·CE_i`; discriminator `i` receives the gradient of
/// `domain_weights[i]·L_d,i`; the extractor additionally receives the
/// discriminator gradients through the reversal layer, scaled by `−lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub class_weights: Vec<f64>,
    pub domain_weights: Vec<f64>,
    pub lambda: f64,
}

impl Objective {
    pub fn classification_only(weights: &[f64]) -> Self {
        Self {
            class_weights: weights.to_vec(),
            domain_weights: vec![0.0; weights.len()],
            lambda: 0.0,
        }
    }
}

fn validate_batch(config: &NetworkConfig, params: &ParameterStore, batch: &Batch<'_>, obj: &Objective) -> Result<()> {
    if !params.same_layout(&ParameterStore::zeros(config)) {
        return Err(Error::invalid("parameter store does not match the network config"));
    }
    let n = config.n_sources;
    if batch.sources.len() != n || obj.class_weights.len() != n || obj.domain_weights.len() != n {
        return Err(Error::invalid(format!("batch and objective must cover {n} sources")));
    }
    if !(obj.lambda >= 0.0) {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    for s in &batch.sources {
        if s.x.len() != s.labels.len() {
            return Err(Error::invalid("source samples and labels must align"));
        }
        for x in &s.x {
            check_input(config, x)?;
        }
    }
    for x in &batch.target {
        check_input(config, x)?;
    }
    if !params.is_finite() {
        return Err(Error::Numeric { term: "parameters".into() });
    }
    Ok(())
}

/// Accumulates the forward values needed for the loss report.
#[derive(Default)]
struct Tally {
    posteriors: Vec<ClassPosterior>,
    labels: Vec<DamageClass>,
    domains: Vec<usize>,
    scores: Vec<DiscriminatorScores>,
}

impl Tally {
    fn finish(self, obj: &Objective) -> Result<LossBreakdown> {
        let (clv, c1) = classification_loss(&self.posteriors, &self.labels, &self.domains, &obj.class_weights)?;
        let (domain, adv, c2) = adversarial_loss(&self.scores, &obj.domain_weights)?;
        let report = LossBreakdown::new(clv, domain, adv, obj.lambda, c1 || c2);
        report.check_finite()?;
        Ok(report)
    }
}

fn run(
    config: &NetworkConfig,
    params: &ParameterStore,
    batch: &Batch<'_>,
    obj: &Objective,
    mut grad: Option<&mut ParameterStore>,
) -> Result<LossBreakdown> {
    validate_batch(config, params, batch, obj)?;
    let layout = ThetaLayout::new(config);
    let n_src = config.n_sources;
    let has_target = !batch.target.is_empty();
    let mut tally = Tally {
        scores: vec![DiscriminatorScores::default(); if has_target { n_src } else { 0 }],
        ..Default::default()
    };
    let d = config.latent_dim();

    for (i, sb) in batch.sources.iter().enumerate() {
        let n = sb.x.len() as f64;
        for (x, &label) in sb.x.iter().zip(&sb.labels) {
            let cache = forward_extract(config, &layout, &params.theta, x);
            let z = &cache.z;
            let mut dz = vec![0.0; d];
            let mut touched = false;

            let cls = run_head(&params.phi, z);
            let posterior = ClassPosterior::from_logits(&[cls.out[0], cls.out[1], cls.out[2]]);
            tally.posteriors.push(posterior);
            tally.labels.push(label);
            tally.domains.push(i);
            if let Some(g) = grad.as_deref_mut() {
                let w = obj.class_weights[i];
                if w != 0.0 {
                    let mut dlogits = posterior.p;
                    dlogits[label.index()] -= 1.0;
                    let dlogits = dlogits.map(|v| v * w / n);
                    let dzc = head_grad(&params.phi, z, &cls, &dlogits, &mut g.phi);
                    dz.iter_mut().zip(&dzc).for_each(|(a, b)| *a += b);
                    touched = true;
                }
            }

            if has_target {
                let disc = run_head(&params.psi[i], z);
                let score = DomainScore::from_preactivation(disc.out[0]);
                tally.scores[i].on_source.push(score.d);
                if let Some(g) = grad.as_deref_mut() {
                    let w = obj.domain_weights[i];
                    if w != 0.0 {
                        // d/da of −log σ(a)
                        let dpre = [(sigmoid(disc.out[0]) - 1.0) * w / n];
                        let dzd = head_grad(&params.psi[i], z, &disc, &dpre, &mut g.psi[i]);
                        let reversed = grl_backward(&dzd, obj.lambda)?;
                        if obj.lambda != 0.0 {
                            dz.iter_mut().zip(&reversed).for_each(|(a, b)| *a += b);
                            touched = true;
                        }
                    }
                }
            }

            if let Some(g) = grad.as_deref_mut() {
                if touched {
                    backward_extract(config, &layout, &params.theta, &cache, &dz, &mut g.theta);
                }
            }
        }
    }

    if has_target {
        let n = batch.target.len() as f64;
        for x in &batch.target {
            let cache = forward_extract(config, &layout, &params.theta, x);
            let z = &cache.z;
            let mut dz = vec![0.0; d];
            let mut touched = false;
            for i in 0..n_src {
                let disc = run_head(&params.psi[i], z);
                tally.scores[i].on_target.push(DomainScore::from_preactivation(disc.out[0]).d);
                if let Some(g) = grad.as_deref_mut() {
                    let w = obj.domain_weights[i];
                    if w != 0.0 {
                        // d/da of −log(1 − σ(a))
                        let dpre = [sigmoid(disc.out[0]) * w / n];
                        let dzd = head_grad(&params.psi[i], z, &disc, &dpre, &mut g.psi[i]);
                        if obj.lambda != 0.0 {
                            let reversed = grl_backward(&dzd, obj.lambda)?;
                            dz.iter_mut().zip(&reversed).for_each(|(a, b)| *a += b);
                            touched = true;
                        }
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                if touched {
                    backward_extract(config, &layout, &params.theta, &cache, &dz, &mut g.theta);
                }
            }
        }
    }

    let mut obj_report = obj.clone();
    if !has_target {
        obj_report.domain_weights.clear();
    }
    tally.finish(&obj_report)
}

/// Loss values of `objective` on `batch`, forward pass only.
pub fn evaluate_losses(
    config: &NetworkConfig,
    params: &ParameterStore,
    batch: &Batch<'_>,
    objective: &Objective,
) -> Result<LossBreakdown> {
    run(config, params, batch, objective, None)
}

/// Reverse-mode gradients of `objective` with respect to every parameter
/// array, with gradient reversal on the discriminator-to-extractor paths.
pub fn gradients(
    config: &NetworkConfig,
    params: &ParameterStore,
    batch: &Batch<'_>,
    objective: &Objective,
) -> Result<(ParameterStore, LossBreakdown)> {
    let mut grad = params.zeros_like();
    let report = run(config, params, batch, objective, Some(&mut grad))?;
    Ok((grad, report))
}
