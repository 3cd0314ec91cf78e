//! Forward and reverse-mode kernels for the network building blocks. All
//! activations are channel-major (`[channel][time]`) except the recurrent
//! input sequence, which is time-major.

/// Same-padded 1-D convolution followed by max-pooling and a rectifier.
///
/// Returns the pooled, rectified output `[cout][t_len / pool]` and, for each
/// pooled value, the time index of the window maximum.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_pool_forward(
    x: &[f64],
    cin: usize,
    t_len: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
    pool: usize,
) -> (Vec<f64>, Vec<u32>) {
    let pad = (k / 2) as isize;
    let t_out = t_len / pool;
    let mut pooled = vec![0.0; cout * t_out];
    let mut argmax = vec![0u32; cout * t_out];
    let mut pre = vec![0.0; t_len];
    for o in 0..cout {
        pre.fill(b[o]);
        for c in 0..cin {
            let xc = &x[c * t_len..(c + 1) * t_len];
            for kk in 0..k {
                let wv = w[(o * cin + c) * k + kk];
                let shift = kk as isize - pad;
                let lo = (-shift).max(0) as usize;
                let hi = (t_len as isize - shift).min(t_len as isize) as usize;
                let src = &xc[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                for (p, s) in pre[lo..hi].iter_mut().zip(src) {
                    *p += wv * s;
                }
            }
        }
        for j in 0..t_out {
            let window = &pre[j * pool..(j + 1) * pool];
            let (mut best, mut at) = (window[0], 0);
            for (i, v) in window.iter().enumerate().skip(1) {
                if *v > best {
                    best = *v;
                    at = i;
                }
            }
            pooled[o * t_out + j] = best.max(0.0);
            argmax[o * t_out + j] = (j * pool + at) as u32;
        }
    }
    (pooled, argmax)
}

/// Reverse pass of [`conv_pool_forward`]. Only window maxima with a positive
/// output receive gradient, so the work scales with the pooled size.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_pool_backward(
    x: &[f64],
    cin: usize,
    t_len: usize,
    w: &[f64],
    cout: usize,
    k: usize,
    pool: usize,
    pooled: &[f64],
    argmax: &[u32],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let pad = k / 2;
    let t_out = t_len / pool;
    for o in 0..cout {
        for j in 0..t_out {
            let idx = o * t_out + j;
            let g = dout[idx];
            if g == 0.0 || pooled[idx] <= 0.0 {
                continue;
            }
            let t = argmax[idx] as usize;
            db[o] += g;
            // input positions t + kk - pad for kk in [kk_lo, kk_hi)
            let kk_lo = pad.saturating_sub(t);
            let kk_hi = k.min(t_len + pad - t);
            for c in 0..cin {
                let wrow = (o * cin + c) * k;
                let xrow = c * t_len;
                for kk in kk_lo..kk_hi {
                    let xi = xrow + t + kk - pad;
                    dw[wrow + kk] += g * x[xi];
                    if let Some(dx) = dx.as_deref_mut() {
                        dx[xi] += g * w[wrow + kk];
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Per-direction recurrent cache, indexed by processing step.
pub(crate) struct LstmCache {
    pub reverse: bool,
    /// Activated gates `[i, f, g, o]` per step, `4H` each.
    pub gates: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmCache {
    pub fn last_hidden(&self, h: usize) -> &[f64] {
        let steps = self.hidden.len() / h;
        &self.hidden[(steps - 1) * h..]
    }
}

/// Gated recurrent pass over a time-major sequence `[t_len][cin]`.
pub(crate) fn lstm_forward(
    seq: &[f64],
    t_len: usize,
    cin: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    h: usize,
    reverse: bool,
) -> LstmCache {
    let g4 = 4 * h;
    let mut gates = vec![0.0; t_len * g4];
    let mut cell = vec![0.0; t_len * h];
    let mut tanh_cell = vec![0.0; t_len * h];
    let mut hidden = vec![0.0; t_len * h];
    let zeros = vec![0.0; h];
    for s in 0..t_len {
        let t = if reverse { t_len - 1 - s } else { s };
        let xt = &seq[t * cin..(t + 1) * cin];
        let (prev_h, prev_c) = if s == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (&hidden[(s - 1) * h..s * h], &cell[(s - 1) * h..s * h])
        };
        let mut pre = vec![0.0; g4];
        for r in 0..g4 {
            pre[r] = bias[r] + dot(&w_ih[r * cin..(r + 1) * cin], xt) + dot(&w_hh[r * h..(r + 1) * h], prev_h);
        }
        let mut c_new = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        let mut tc = vec![0.0; h];
        let gs = &mut gates[s * g4..(s + 1) * g4];
        for j in 0..h {
            let i = sigmoid(pre[j]);
            let f = sigmoid(pre[h + j]);
            let g = pre[2 * h + j].tanh();
            let o = sigmoid(pre[3 * h + j]);
            gs[j] = i;
            gs[h + j] = f;
            gs[2 * h + j] = g;
            gs[3 * h + j] = o;
            c_new[j] = f * prev_c[j] + i * g;
            tc[j] = c_new[j].tanh();
            h_new[j] = o * tc[j];
        }
        cell[s * h..(s + 1) * h].copy_from_slice(&c_new);
        tanh_cell[s * h..(s + 1) * h].copy_from_slice(&tc);
        hidden[s * h..(s + 1) * h].copy_from_slice(&h_new);
    }
    LstmCache {
        reverse,
        gates,
        cell,
        tanh_cell,
        hidden,
    }
}

/// Back-propagation through time from a gradient on the final hidden state.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward(
    cache: &LstmCache,
    seq: &[f64],
    t_len: usize,
    cin: usize,
    w_ih: &[f64],
    w_hh: &[f64],
    h: usize,
    dh_last: &[f64],
    dw_ih: &mut [f64],
    dw_hh: &mut [f64],
    dbias: &mut [f64],
    dseq: &mut [f64],
) {
    let g4 = 4 * h;
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h];
    let mut da = vec![0.0; g4];
    let zeros = vec![0.0; h];
    for s in (0..t_len).rev() {
        let t = if cache.reverse { t_len - 1 - s } else { s };
        let gs = &cache.gates[s * g4..(s + 1) * g4];
        let tc = &cache.tanh_cell[s * h..(s + 1) * h];
        let (prev_h, prev_c) = if s == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (&cache.hidden[(s - 1) * h..s * h], &cache.cell[(s - 1) * h..s * h])
        };
        for j in 0..h {
            let (i, f, g, o) = (gs[j], gs[h + j], gs[2 * h + j], gs[3 * h + j]);
            let d_o = dh[j] * tc[j];
            let dcj = dc[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
            da[j] = dcj * g * i * (1.0 - i);
            da[h + j] = dcj * prev_c[j] * f * (1.0 - f);
            da[2 * h + j] = dcj * i * (1.0 - g * g);
            da[3 * h + j] = d_o * o * (1.0 - o);
            dc[j] = dcj * f;
        }
        let xt = &seq[t * cin..(t + 1) * cin];
        let dxt = &mut dseq[t * cin..(t + 1) * cin];
        dh.fill(0.0);
        for r in 0..g4 {
            let a = da[r];
            if a == 0.0 {
                continue;
            }
            dbias[r] += a;
            axpy(a, xt, &mut dw_ih[r * cin..(r + 1) * cin]);
            axpy(a, prev_h, &mut dw_hh[r * h..(r + 1) * h]);
            axpy(a, &w_ih[r * cin..(r + 1) * cin], dxt);
            axpy(a, &w_hh[r * h..(r + 1) * h], &mut dh);
        }
    }
}

/// Cache of a one-hidden-layer head.
pub(crate) struct HeadCache {
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn head_forward(z: &[f64], w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> HeadCache {
    let d = z.len();
    let hidden: Vec<f64> = b1
        .iter()
        .enumerate()
        .map(|(r, b)| (b + dot(&w1[r * d..(r + 1) * d], z)).max(0.0))
        .collect();
    let hw = hidden.len();
    let out = b2
        .iter()
        .enumerate()
        .map(|(r, b)| b + dot(&w2[r * hw..(r + 1) * hw], &hidden))
        .collect();
    HeadCache { hidden, out }
}

/// Accumulates head gradients and returns the gradient on `z`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn head_backward(
    z: &[f64],
    cache: &HeadCache,
    w1: &[f64],
    w2: &[f64],
    dout: &[f64],
    dw1: &mut [f64],
    db1: &mut [f64],
    dw2: &mut [f64],
    db2: &mut [f64],
) -> Vec<f64> {
    let d = z.len();
    let hw = cache.hidden.len();
    let mut dhidden = vec![0.0; hw];
    for (r, g) in dout.iter().enumerate() {
        db2[r] += g;
        axpy(*g, &cache.hidden, &mut dw2[r * hw..(r + 1) * hw]);
        axpy(*g, &w2[r * hw..(r + 1) * hw], &mut dhidden);
    }
    let mut dz = vec![0.0; d];
    for r in 0..hw {
        if cache.hidden[r] <= 0.0 {
            continue;
        }
        let g = dhidden[r];
        db1[r] += g;
        axpy(g, z, &mut dw1[r * d..(r + 1) * d]);
        axpy(g, &w1[r * d..(r + 1) * d], &mut dz);
    }
    dz
}
