//! Plain-loop reference implementations used as oracles. Nothing here
//! touches the tape; every formula is written out element by element.
#![allow(dead_code)]

use cer::nn::{AttnPoolParams, BiGruParams, BilinearParams, GateParams, GruParams};
use cer::tensor::{ParamId, ParamStore, Rng, Tensor};

pub type Mat = Vec<Vec<f64>>;

pub fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
}

pub fn random_mat(rng: &mut Rng, r: usize, c: usize) -> Mat {
    (0..r).map(|_| random_vec(rng, c)).collect()
}

pub fn flat(m: &Mat) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn tensor(m: &Mat) -> Tensor<f64> {
    Tensor::matrix(m.len(), m[0].len(), flat(m)).unwrap()
}

pub fn unflat(data: &[f64], cols: usize) -> Mat {
    data.chunks(cols).map(<[f64]>::to_vec).collect()
}

/// A stored parameter as a row-major matrix (vectors become one row).
pub fn param(store: &ParamStore<f64>, id: ParamId) -> Mat {
    let t = store.get(id);
    let cols = *t.shape().last().unwrap();
    unflat(t.data(), cols)
}

pub fn param_vec(store: &ParamStore<f64>, id: ParamId) -> Vec<f64> {
    store.get(id).data().to_vec()
}

/// Overwrites every parameter with fresh values in `[-1, 1)`, so biases
/// are nonzero too.
pub fn randomize(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = Rng::new(seed);
    for id in store.ids().collect::<Vec<_>>() {
        for x in store.get_mut(id).data_mut() {
            *x = rng.uniform_range(-1.0, 1.0);
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (m, k, n) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            c[i][j] = s;
        }
    }
    c
}

/// `x · W` for a row vector `x`.
pub fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; w[0].len()];
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * w[i][j];
        }
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `p_i = 1 / Σ_j exp(x_j - x_i)`: no max subtraction and no shared
/// normaliser, so it shares no rounding path with the library softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| 1.0 / x.iter().map(|&xj| (xj - xi).exp()).sum::<f64>())
        .collect()
}

pub fn gru_step(store: &ParamStore<f64>, p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let (wz, wr, wh) = (param(store, p.w_z), param(store, p.w_r), param(store, p.w_h));
    let (uz, ur, uh) = (param(store, p.u_z), param(store, p.u_r), param(store, p.u_h));
    let (bz, br, bh) = (param_vec(store, p.b_z), param_vec(store, p.b_r), param_vec(store, p.b_h));
    let d = p.d_h;
    let mut z = vec![0.0; d];
    let mut r = vec![0.0; d];
    for k in 0..d {
        let mut sz = bz[k];
        let mut sr = br[k];
        for i in 0..p.d_in {
            sz += x[i] * wz[i][k];
            sr += x[i] * wr[i][k];
        }
        for i in 0..d {
            sz += h[i] * uz[i][k];
            sr += h[i] * ur[i][k];
        }
        z[k] = sigmoid(sz);
        r[k] = sigmoid(sr);
    }
    let mut out = vec![0.0; d];
    for k in 0..d {
        let mut s = bh[k];
        for i in 0..p.d_in {
            s += x[i] * wh[i][k];
        }
        for i in 0..d {
            s += r[i] * h[i] * uh[i][k];
        }
        let cand = s.tanh();
        out[k] = (1.0 - z[k]) * h[k] + z[k] * cand;
    }
    out
}

pub fn gru_pass(store: &ParamStore<f64>, p: &GruParams, xs: &Mat, reverse: bool) -> Mat {
    let mut h = vec![0.0; p.d_h];
    let mut out = vec![Vec::new(); xs.len()];
    let order: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
    for t in order {
        h = gru_step(store, p, &xs[t], &h);
        out[t] = h.clone();
    }
    out
}

/// Two independent passes, concatenated per position.
pub fn bigru(store: &ParamStore<f64>, p: &BiGruParams, xs: &Mat) -> Mat {
    let f = gru_pass(store, &p.forward, xs, false);
    let b = gru_pass(store, &p.backward, xs, true);
    f.into_iter().zip(b).map(|(mut a, b)| {
        a.extend(b);
        a
    })
    .collect()
}

pub fn attention_pool(store: &ParamStore<f64>, p: &AttnPoolParams, hs: &Mat) -> (Vec<f64>, Vec<f64>) {
    let w = param(store, p.w_a);
    let b = param_vec(store, p.b_a);
    let v = param_vec(store, p.v_a);
    let scores: Vec<f64> = hs
        .iter()
        .map(|h| {
            let mut s = 0.0;
            for k in 0..p.dim {
                let mut z = b[k];
                for i in 0..p.dim {
                    z += h[i] * w[i][k];
                }
                s += z.tanh() * v[k];
            }
            s
        })
        .collect();
    let alpha = softmax(&scores);
    let mut u = vec![0.0; p.dim];
    for (a, h) in alpha.iter().zip(hs) {
        for k in 0..p.dim {
            u[k] += a * h[k];
        }
    }
    (u, alpha)
}

/// `g ⊙ shared + (1 - g) ⊙ task`, the textbook form.
pub fn gate(store: &ParamStore<f64>, p: &GateParams, task: &[f64], shared: &[f64]) -> Vec<f64> {
    let w = param(store, p.w_g);
    let b = param_vec(store, p.b_g);
    (0..p.dim)
        .map(|k| {
            let mut s = b[k];
            for i in 0..p.dim {
                s += task[i] * w[i][k];
            }
            let g = sigmoid(s);
            g * shared[k] + (1.0 - g) * task[k]
        })
        .collect()
}

pub fn cross_attend(store: &ParamStore<f64>, p: &BilinearParams, tgt: &Mat, src: &Mat) -> (Mat, Mat) {
    let w = param(store, p.w_c);
    let n = tgt.len();
    let mut beta = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut c = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..p.dim {
                for b in 0..p.dim {
                    s += tgt[i][a] * w[a][b] * src[j][b];
                }
            }
            c[j] = s;
        }
        let bi = softmax(&c);
        let mut row = tgt[i].clone();
        for k in 0..p.dim {
            row.push((0..n).map(|j| bi[j] * src[j][k]).sum());
        }
        beta.push(bi);
        out.push(row);
    }
    (out, beta)
}

pub fn pair_features(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = a.to_vec();
    out.extend_from_slice(b);
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    let d = max_abs_diff(a, b);
    assert!(d <= tol, "max difference {d:e} exceeds {tol:e}\n  got:      {a:?}\n  expected: {b:?}");
}
