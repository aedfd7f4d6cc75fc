//! Layer kernels. Feature maps are `[channel][time][dim]`; sequences are
//! `[time][feature]`.

use super::params::GruWeights;

/// 3x3 convolution with zero "same" padding and stride 1.
pub(crate) fn conv3x3_forward(
    input: &[f64],
    cin: usize,
    t: usize,
    d: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
) -> Vec<f64> {
    let plane = t * d;
    let mut out = vec![0.0; cout * plane];
    for co in 0..cout {
        let o = &mut out[co * plane..(co + 1) * plane];
        o.fill(b[co]);
        for ci in 0..cin {
            let x = &input[ci * plane..(ci + 1) * plane];
            let k = &w[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
            for ki in 0..3 {
                for kj in 0..3 {
                    let wv = k[ki * 3 + kj];
                    if wv == 0.0 {
                        continue;
                    }
                    // Output (i, j) reads input (i + ki - 1, j + kj - 1).
                    let i0 = 1usize.saturating_sub(ki);
                    let i1 = (t + 1).saturating_sub(ki).min(t);
                    let j0 = 1usize.saturating_sub(kj);
                    let j1 = (d + 1).saturating_sub(kj).min(d);
                    for i in i0..i1 {
                        let src = (i + ki - 1) * d;
                        let dst = i * d;
                        for j in j0..j1 {
                            o[dst + j] += wv * x[src + j + kj - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `need_input` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    t: usize,
    d: usize,
    w: &[f64],
    cout: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    need_input: bool,
) -> Option<Vec<f64>> {
    let plane = t * d;
    let mut din = need_input.then(|| vec![0.0; cin * plane]);
    for co in 0..cout {
        let g = &dout[co * plane..(co + 1) * plane];
        db[co] += g.iter().sum::<f64>();
        for ci in 0..cin {
            let x = &input[ci * plane..(ci + 1) * plane];
            let base = (co * cin + ci) * 9;
            for ki in 0..3 {
                for kj in 0..3 {
                    let i0 = 1usize.saturating_sub(ki);
                    let i1 = (t + 1).saturating_sub(ki).min(t);
                    let j0 = 1usize.saturating_sub(kj);
                    let j1 = (d + 1).saturating_sub(kj).min(d);
                    let mut acc = 0.0;
                    for i in i0..i1 {
                        let src = (i + ki - 1) * d;
                        let dst = i * d;
                        for j in j0..j1 {
                            acc += g[dst + j] * x[src + j + kj - 1];
                        }
                    }
                    dw[base + ki * 3 + kj] += acc;
                    if let Some(din) = din.as_mut() {
                        let wv = w[base + ki * 3 + kj];
                        let dx = &mut din[ci * plane..(ci + 1) * plane];
                        for i in i0..i1 {
                            let src = (i + ki - 1) * d;
                            let dst = i * d;
                            for j in j0..j1 {
                                dx[src + j + kj - 1] += wv * g[dst + j];
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

pub(crate) fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` where the ReLU output was not positive.
pub(crate) fn relu_backward(out: &[f64], grad: &mut [f64]) {
    for (g, o) in grad.iter_mut().zip(out) {
        if *o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Batch-norm cache for a group of feature maps sharing channel statistics.
pub(crate) struct BnCache {
    pub xhat: Vec<Vec<f64>>,
    pub inv_std: Vec<f64>,
    pub count: usize,
}

/// Per-channel statistics over every position of every map. Returns the
/// normalized outputs, the cache and the batch mean and unbiased variance.
pub(crate) fn bn_forward_train(
    xs: &[Vec<f64>],
    channels: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> (Vec<Vec<f64>>, BnCache, Vec<f64>, Vec<f64>) {
    let count: usize = xs.iter().map(|x| x.len() / channels).sum();
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for x in xs {
        let plane = x.len() / channels;
        for c in 0..channels {
            mean[c] += x[c * plane..(c + 1) * plane].iter().sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    for x in xs {
        let plane = x.len() / channels;
        for c in 0..channels {
            var[c] += x[c * plane..(c + 1) * plane]
                .iter()
                .map(|v| (v - mean[c]).powi(2))
                .sum::<f64>();
        }
    }
    let unbiased: Vec<f64> = var
        .iter()
        .map(|v| {
            if count > 1 {
                v / (count - 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    let inv_std: Vec<f64> = var
        .iter()
        .map(|v| 1.0 / (v / count as f64 + eps).sqrt())
        .collect();
    let mut xhat = Vec::with_capacity(xs.len());
    let mut ys = Vec::with_capacity(xs.len());
    for x in xs {
        let plane = x.len() / channels;
        let mut h = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for c in 0..channels {
            for i in c * plane..(c + 1) * plane {
                h[i] = (x[i] - mean[c]) * inv_std[c];
                y[i] = gamma[c] * h[i] + beta[c];
            }
        }
        xhat.push(h);
        ys.push(y);
    }
    (
        ys,
        BnCache {
            xhat,
            inv_std,
            count,
        },
        mean,
        unbiased,
    )
}

pub(crate) fn bn_forward_eval(
    x: &[f64],
    channels: usize,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Vec<f64> {
    let plane = x.len() / channels;
    let mut y = vec![0.0; x.len()];
    for c in 0..channels {
        let s = gamma[c] / (running_var[c] + eps).sqrt();
        for i in c * plane..(c + 1) * plane {
            y[i] = (x[i] - running_mean[c]) * s + beta[c];
        }
    }
    y
}

pub(crate) fn bn_backward(
    dys: &[Vec<f64>],
    cache: &BnCache,
    channels: usize,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<Vec<f64>> {
    let n = cache.count as f64;
    let mut sum_dy = vec![0.0; channels];
    let mut sum_dy_xhat = vec![0.0; channels];
    for (dy, xh) in dys.iter().zip(&cache.xhat) {
        let plane = dy.len() / channels;
        for c in 0..channels {
            for i in c * plane..(c + 1) * plane {
                sum_dy[c] += dy[i];
                sum_dy_xhat[c] += dy[i] * xh[i];
            }
        }
    }
    for c in 0..channels {
        dgamma[c] += sum_dy_xhat[c];
        dbeta[c] += sum_dy[c];
    }
    dys.iter()
        .zip(&cache.xhat)
        .map(|(dy, xh)| {
            let plane = dy.len() / channels;
            let mut dx = vec![0.0; dy.len()];
            for c in 0..channels {
                let k = gamma[c] * cache.inv_std[c] / n;
                for i in c * plane..(c + 1) * plane {
                    dx[i] = k * (n * dy[i] - sum_dy[c] - xh[i] * sum_dy_xhat[c]);
                }
            }
            dx
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y += W x` for row-major `W` of shape `rows x x.len()`.
fn matvec_add(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *yr += acc;
    }
}

/// `x += W^T g`.
fn matvec_t_add(w: &[f64], g: &[f64], x: &mut [f64]) {
    let cols = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (xi, wi) in x.iter_mut().zip(row) {
            *xi += gr * wi;
        }
    }
}

/// `W += g x^T`.
fn outer_add(w: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        let row = &mut w[r * cols..(r + 1) * cols];
        for (wi, xi) in row.iter_mut().zip(x) {
            *wi += gr * xi;
        }
    }
}

pub(crate) struct GruCache {
    /// `(T + 1) x H`; row 0 is the zero initial state.
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `W_hn h + b_hn` per step.
    pub hn: Vec<f64>,
}

/// Unidirectional GRU with the PyTorch gate equations:
/// r = σ(W_ir x + b_ir + W_hr h + b_hr), z likewise,
/// n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn)), h' = (1 - z) ⊙ n + z ⊙ h.
pub(crate) fn gru_forward(
    p: &GruWeights,
    x: &[f64],
    t: usize,
    input: usize,
    hidden: usize,
) -> (Vec<f64>, GruCache) {
    let h3 = 3 * hidden;
    let mut c = GruCache {
        h: vec![0.0; (t + 1) * hidden],
        r: vec![0.0; t * hidden],
        z: vec![0.0; t * hidden],
        n: vec![0.0; t * hidden],
        hn: vec![0.0; t * hidden],
    };
    let mut gi = vec![0.0; h3];
    let mut gh = vec![0.0; h3];
    for s in 0..t {
        gi.copy_from_slice(&p.b_ih);
        matvec_add(&p.w_ih, &x[s * input..(s + 1) * input], &mut gi);
        gh.copy_from_slice(&p.b_hh);
        let (hist, rest) = c.h.split_at_mut((s + 1) * hidden);
        let hp = &hist[s * hidden..];
        matvec_add(&p.w_hh, hp, &mut gh);
        let hnew = &mut rest[..hidden];
        for k in 0..hidden {
            let r = sigmoid(gi[k] + gh[k]);
            let z = sigmoid(gi[hidden + k] + gh[hidden + k]);
            let hn = gh[2 * hidden + k];
            let n = (gi[2 * hidden + k] + r * hn).tanh();
            c.r[s * hidden + k] = r;
            c.z[s * hidden + k] = z;
            c.n[s * hidden + k] = n;
            c.hn[s * hidden + k] = hn;
            hnew[k] = (1.0 - z) * n + z * hp[k];
        }
    }
    let out = c.h[hidden..].to_vec();
    (out, c)
}

/// Backpropagation through time. Accumulates into `g` and returns the
/// input gradient `T x input`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    p: &GruWeights,
    g: &mut GruWeights,
    x: &[f64],
    c: &GruCache,
    dout: &[f64],
    t: usize,
    input: usize,
    hidden: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; t * input];
    let mut dh = vec![0.0; hidden];
    let mut dgi = vec![0.0; 3 * hidden];
    let mut dgh = vec![0.0; 3 * hidden];
    for s in (0..t).rev() {
        for k in 0..hidden {
            dh[k] += dout[s * hidden + k];
        }
        let hp = &c.h[s * hidden..(s + 1) * hidden];
        let mut dh_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let i = s * hidden + k;
            let (r, z, n, hn) = (c.r[i], c.z[i], c.n[i], c.hn[i]);
            let dn = dh[k] * (1.0 - z);
            let dz = dh[k] * (hp[k] - n);
            dh_prev[k] = dh[k] * z;
            let dn_pre = dn * (1.0 - n * n);
            let dr = dn_pre * hn;
            let dr_pre = dr * r * (1.0 - r);
            let dz_pre = dz * z * (1.0 - z);
            dgi[k] = dr_pre;
            dgi[hidden + k] = dz_pre;
            dgi[2 * hidden + k] = dn_pre;
            dgh[k] = dr_pre;
            dgh[hidden + k] = dz_pre;
            dgh[2 * hidden + k] = dn_pre * r;
        }
        let xs = &x[s * input..(s + 1) * input];
        outer_add(&mut g.w_ih, &dgi, xs);
        outer_add(&mut g.w_hh, &dgh, hp);
        for k in 0..3 * hidden {
            g.b_ih[k] += dgi[k];
            g.b_hh[k] += dgh[k];
        }
        matvec_t_add(&p.w_ih, &dgi, &mut dx[s * input..(s + 1) * input]);
        matvec_t_add(&p.w_hh, &dgh, &mut dh_prev);
        dh = dh_prev;
    }
    dx
}

/// `y[t] = W x[t] + b` over a sequence.
pub(crate) fn dense_forward(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    t: usize,
    input: usize,
    out: usize,
) -> Vec<f64> {
    let mut y = vec![0.0; t * out];
    for s in 0..t {
        let ys = &mut y[s * out..(s + 1) * out];
        ys.copy_from_slice(b);
        matvec_add(w, &x[s * input..(s + 1) * input], ys);
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    w: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    x: &[f64],
    dy: &[f64],
    t: usize,
    input: usize,
    out: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; t * input];
    for s in 0..t {
        let g = &dy[s * out..(s + 1) * out];
        outer_add(dw, g, &x[s * input..(s + 1) * input]);
        for (b, gv) in db.iter_mut().zip(g) {
            *b += gv;
        }
        matvec_t_add(w, g, &mut dx[s * input..(s + 1) * input]);
    }
    dx
}

/// Linear x2 upsampling along time: sample `2t` copies frame `t`, sample
/// `2t + 1` is the midpoint of frames `t` and `t + 1`, and the last frame
/// is repeated.
pub fn upsample2(x: &[f64], t: usize, width: usize) -> Vec<f64> {
    let mut y = vec![0.0; 2 * t * width];
    for s in 0..t {
        let cur = &x[s * width..(s + 1) * width];
        let next = if s + 1 < t {
            &x[(s + 1) * width..(s + 2) * width]
        } else {
            cur
        };
        for k in 0..width {
            y[2 * s * width + k] = cur[k];
            y[(2 * s + 1) * width + k] = 0.5 * (cur[k] + next[k]);
        }
    }
    y
}

pub(crate) fn upsample2_backward(dy: &[f64], t: usize, width: usize) -> Vec<f64> {
    let mut dx = vec![0.0; t * width];
    for s in 0..t {
        for k in 0..width {
            let g_even = dy[2 * s * width + k];
            let g_odd = dy[(2 * s + 1) * width + k];
            dx[s * width + k] += g_even + 0.5 * g_odd;
            let nxt = if s + 1 < t { s + 1 } else { s };
            dx[nxt * width + k] += 0.5 * g_odd;
        }
    }
    dx
}
