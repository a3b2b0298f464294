//! Single-layer LSTM and GRU over a `[T, in]` sequence, returning all hidden
//! states `[T, H]`. Backward runs BPTT over the whole unrolled sequence.

use rand::Rng;

use super::gemm::gemm;
use super::init::xavier_uniform;
use super::layers::sigmoid;
use super::Tensor;
use crate::error::{Error, Result};

fn seq_dims(x: &Tensor, in_dim: usize, what: &str) -> Result<usize> {
    let s = x.shape();
    if s.len() != 2 || s[1] != in_dim || s[0] == 0 {
        return Err(Error::Shape(format!("{what}: expected [T>=1, {in_dim}], got {s:?}")));
    }
    Ok(s[0])
}

/// LSTM with gate rows ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    /// `[4H, in]`
    pub w_ih: Tensor,
    /// `[4H, H]`
    pub w_hh: Tensor,
    /// `[4H]`
    pub bias: Tensor,
    cache: Vec<LstmCache>,
}

#[derive(Debug, Clone)]
struct LstmCache {
    x: Vec<f64>,
    // Per step: activated gates [4H], cell state, hidden state.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

impl Lstm {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_ih: xavier_uniform(&[4 * hidden, in_dim], in_dim, hidden, rng),
            w_hh: xavier_uniform(&[4 * hidden, hidden], hidden, hidden, rng),
            bias: Tensor::zeros(&[4 * hidden]),
            cache: Vec::new(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    fn run(&self, x: &Tensor) -> Result<LstmCache> {
        let t_len = seq_dims(x, self.in_dim(), "lstm")?;
        let h_dim = self.hidden();
        let g4 = 4 * h_dim;
        let mut pre = vec![0.0; t_len * g4];
        gemm(t_len, self.in_dim(), g4, 1.0, x.values(), false, self.w_ih.values(), true, 0.0, &mut pre);
        let mut gates = vec![0.0; t_len * g4];
        let mut c = vec![0.0; t_len * h_dim];
        let mut h = vec![0.0; t_len * h_dim];
        let mut h_prev = vec![0.0; h_dim];
        let mut c_prev = vec![0.0; h_dim];
        for t in 0..t_len {
            let z = &mut pre[t * g4..(t + 1) * g4];
            gemm(1, h_dim, g4, 1.0, &h_prev, false, self.w_hh.values(), true, 1.0, z);
            let a = &mut gates[t * g4..(t + 1) * g4];
            for j in 0..g4 {
                let v = z[j] + self.bias.values()[j];
                a[j] = if (2 * h_dim..3 * h_dim).contains(&j) { v.tanh() } else { sigmoid(v) };
            }
            for k in 0..h_dim {
                let (i, f, g, o) = (a[k], a[h_dim + k], a[2 * h_dim + k], a[3 * h_dim + k]);
                let ct = f * c_prev[k] + i * g;
                c[t * h_dim + k] = ct;
                h[t * h_dim + k] = o * ct.tanh();
            }
            h_prev.copy_from_slice(&h[t * h_dim..(t + 1) * h_dim]);
            c_prev.copy_from_slice(&c[t * h_dim..(t + 1) * h_dim]);
        }
        Ok(LstmCache {
            x: x.values().to_vec(),
            gates,
            c,
            h,
        })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let c = self.run(x)?;
        Tensor::from_vec(&[x.shape()[0], self.hidden()], c.h)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let c = self.run(x)?;
        let out = Tensor::from_vec(&[x.shape()[0], self.hidden()], c.h.clone())?;
        self.cache.push(c);
        Ok(out)
    }

    /// `grad_h` is the loss gradient with respect to every hidden state.
    pub fn backward(&mut self, grad_h: &Tensor) -> Result<Tensor> {
        let c = self
            .cache
            .pop()
            .ok_or_else(|| Error::State("lstm: backward called without a matching forward".into()))?;
        let h_dim = self.hidden();
        let in_dim = self.in_dim();
        let g4 = 4 * h_dim;
        let t_len = c.h.len() / h_dim;
        grad_h.expect_shape(&[t_len, h_dim], "lstm backward")?;
        let mut dz = vec![0.0; t_len * g4];
        let mut dh_next = vec![0.0; h_dim];
        let mut dc_next = vec![0.0; h_dim];
        for t in (0..t_len).rev() {
            let a = &c.gates[t * g4..(t + 1) * g4];
            let d = &mut dz[t * g4..(t + 1) * g4];
            for k in 0..h_dim {
                let (i, f, g, o) = (a[k], a[h_dim + k], a[2 * h_dim + k], a[3 * h_dim + k]);
                let ct = c.c[t * h_dim + k];
                let c_prev = if t > 0 { c.c[(t - 1) * h_dim + k] } else { 0.0 };
                let tc = ct.tanh();
                let dh = grad_h.values()[t * h_dim + k] + dh_next[k];
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                d[k] = dc * g * i * (1.0 - i);
                d[h_dim + k] = dc * c_prev * f * (1.0 - f);
                d[2 * h_dim + k] = dc * i * (1.0 - g * g);
                d[3 * h_dim + k] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            gemm(1, g4, h_dim, 1.0, d, false, self.w_hh.values(), false, 0.0, &mut dh_next);
        }
        gemm(g4, t_len, in_dim, 1.0, &dz, true, &c.x, false, 1.0, self.w_ih.grad_mut());
        let whh_grad = self.w_hh.grad_mut();
        if t_len > 1 {
            gemm(
                g4,
                t_len - 1,
                h_dim,
                1.0,
                &dz[g4..],
                true,
                &c.h[..(t_len - 1) * h_dim],
                false,
                1.0,
                whh_grad,
            );
        }
        let bg = self.bias.grad_mut();
        for row in dz.chunks_exact(g4) {
            bg.iter_mut().zip(row).for_each(|(b, v)| *b += v);
        }
        let mut dx = vec![0.0; t_len * in_dim];
        gemm(t_len, g4, in_dim, 1.0, &dz, false, self.w_ih.values(), false, 0.0, &mut dx);
        Tensor::from_vec(&[t_len, in_dim], dx)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

/// GRU with gate rows ordered reset, update, candidate; the candidate uses
/// `r * (W_hn h + b_hn)`.
#[derive(Debug, Clone)]
pub struct Gru {
    /// `[3H, in]`
    pub w_ih: Tensor,
    /// `[3H, H]`
    pub w_hh: Tensor,
    /// `[3H]`
    pub b_ih: Tensor,
    /// `[3H]`
    pub b_hh: Tensor,
    cache: Vec<GruCache>,
}

#[derive(Debug, Clone)]
struct GruCache {
    x: Vec<f64>,
    // Per step: r, z, n activations [3H] and the hidden-side candidate term
    // W_hn h + b_hn [H].
    gates: Vec<f64>,
    hn: Vec<f64>,
    h: Vec<f64>,
}

impl Gru {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_ih: xavier_uniform(&[3 * hidden, in_dim], in_dim, hidden, rng),
            w_hh: xavier_uniform(&[3 * hidden, hidden], hidden, hidden, rng),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
            cache: Vec::new(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    fn run(&self, x: &Tensor) -> Result<GruCache> {
        let t_len = seq_dims(x, self.in_dim(), "gru")?;
        let h_dim = self.hidden();
        let g3 = 3 * h_dim;
        let mut xi = vec![0.0; t_len * g3];
        gemm(t_len, self.in_dim(), g3, 1.0, x.values(), false, self.w_ih.values(), true, 0.0, &mut xi);
        let mut gates = vec![0.0; t_len * g3];
        let mut hn_all = vec![0.0; t_len * h_dim];
        let mut h = vec![0.0; t_len * h_dim];
        let mut h_prev = vec![0.0; h_dim];
        let mut hh = vec![0.0; g3];
        let (bi, bh) = (self.b_ih.values(), self.b_hh.values());
        for t in 0..t_len {
            hh.copy_from_slice(bh);
            gemm(1, h_dim, g3, 1.0, &h_prev, false, self.w_hh.values(), true, 1.0, &mut hh);
            let xt = &xi[t * g3..(t + 1) * g3];
            let a = &mut gates[t * g3..(t + 1) * g3];
            for k in 0..h_dim {
                let r = sigmoid(xt[k] + bi[k] + hh[k]);
                let z = sigmoid(xt[h_dim + k] + bi[h_dim + k] + hh[h_dim + k]);
                let hn = hh[2 * h_dim + k];
                let n = (xt[2 * h_dim + k] + bi[2 * h_dim + k] + r * hn).tanh();
                a[k] = r;
                a[h_dim + k] = z;
                a[2 * h_dim + k] = n;
                hn_all[t * h_dim + k] = hn;
                h[t * h_dim + k] = (1.0 - z) * n + z * h_prev[k];
            }
            h_prev.copy_from_slice(&h[t * h_dim..(t + 1) * h_dim]);
        }
        Ok(GruCache {
            x: x.values().to_vec(),
            gates,
            hn: hn_all,
            h,
        })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let c = self.run(x)?;
        Tensor::from_vec(&[x.shape()[0], self.hidden()], c.h)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let c = self.run(x)?;
        let out = Tensor::from_vec(&[x.shape()[0], self.hidden()], c.h.clone())?;
        self.cache.push(c);
        Ok(out)
    }

    pub fn backward(&mut self, grad_h: &Tensor) -> Result<Tensor> {
        let c = self
            .cache
            .pop()
            .ok_or_else(|| Error::State("gru: backward called without a matching forward".into()))?;
        let h_dim = self.hidden();
        let in_dim = self.in_dim();
        let g3 = 3 * h_dim;
        let t_len = c.h.len() / h_dim;
        grad_h.expect_shape(&[t_len, h_dim], "gru backward")?;
        let mut gi = vec![0.0; t_len * g3];
        let mut gh = vec![0.0; t_len * g3];
        let mut dh_next = vec![0.0; h_dim];
        for t in (0..t_len).rev() {
            let a = &c.gates[t * g3..(t + 1) * g3];
            let di = &mut gi[t * g3..(t + 1) * g3];
            let dhh = &mut gh[t * g3..(t + 1) * g3];
            let mut dh_prev = vec![0.0; h_dim];
            for k in 0..h_dim {
                let (r, z, n) = (a[k], a[h_dim + k], a[2 * h_dim + k]);
                let hp = if t > 0 { c.h[(t - 1) * h_dim + k] } else { 0.0 };
                let dh = grad_h.values()[t * h_dim + k] + dh_next[k];
                let dn = dh * (1.0 - z) * (1.0 - n * n);
                let dz = dh * (hp - n) * z * (1.0 - z);
                let dr = dn * c.hn[t * h_dim + k] * r * (1.0 - r);
                di[k] = dr;
                di[h_dim + k] = dz;
                di[2 * h_dim + k] = dn;
                dhh[k] = dr;
                dhh[h_dim + k] = dz;
                dhh[2 * h_dim + k] = dn * r;
                dh_prev[k] = dh * z;
            }
            gemm(1, g3, h_dim, 1.0, dhh, false, self.w_hh.values(), false, 1.0, &mut dh_prev);
            dh_next = dh_prev;
        }
        gemm(g3, t_len, in_dim, 1.0, &gi, true, &c.x, false, 1.0, self.w_ih.grad_mut());
        let whh_grad = self.w_hh.grad_mut();
        if t_len > 1 {
            gemm(
                g3,
                t_len - 1,
                h_dim,
                1.0,
                &gh[g3..],
                true,
                &c.h[..(t_len - 1) * h_dim],
                false,
                1.0,
                whh_grad,
            );
        }
        for (b, rows) in [(&mut self.b_ih, &gi), (&mut self.b_hh, &gh)] {
            let bg = b.grad_mut();
            for row in rows.chunks_exact(g3) {
                bg.iter_mut().zip(row).for_each(|(b, v)| *b += v);
            }
        }
        let mut dx = vec![0.0; t_len * in_dim];
        gemm(t_len, g3, in_dim, 1.0, &gi, false, self.w_ih.values(), false, 0.0, &mut dx);
        Tensor::from_vec(&[t_len, in_dim], dx)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}
