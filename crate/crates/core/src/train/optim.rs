use serde::{Deserialize, Serialize};

use crate::net::{Param, ParameterStore};

/// Adaptive-moment optimizer state, one moment pair per parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: ParameterStore,
    v: ParameterStore,
}

impl Adam {
    pub fn new(params: &ParameterStore, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ParameterStore, grad: &ParameterStore) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params.iter_mut().zip(grad.iter()).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = b1 * m.data[j] + (1.0 - b1) * gj;
                v.data[j] = b2 * v.data[j] + (1.0 - b2) * gj * gj;
                let mh = m.data[j] / c1;
                let vh = v.data[j] / c2;
                p.data[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

fn sq_norm(group: &[Param]) -> f64 {
    group.iter().flat_map(|p| &p.data).map(|v| v * v).sum()
}

fn scale(group: &mut [Param], s: f64) {
    group.iter_mut().flat_map(|p| &mut p.data).for_each(|v| *v *= s);
}

/// Rescales each player's gradient to an L2 norm of at most `max_norm`:
/// extractor and classifier jointly, and each discriminator on its own.
/// Returns the pre-clip norms, extractor/classifier first.
pub fn clip_by_player(grad: &mut ParameterStore, max_norm: f64) -> Vec<f64> {
    let mut norms = Vec::with_capacity(1 + grad.psi.len());
    let main = (sq_norm(&grad.theta) + sq_norm(&grad.phi)).sqrt();
    if main > max_norm {
        scale(&mut grad.theta, max_norm / main);
        scale(&mut grad.phi, max_norm / main);
    }
    norms.push(main);
    for psi in &mut grad.psi {
        let n = sq_norm(psi).sqrt();
        if n > max_norm {
            scale(psi, max_norm / n);
        }
        norms.push(n);
    }
    norms
}
