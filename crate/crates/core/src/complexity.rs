//! Dense FLOP counts, data-dependent effective FLOPs and memory footprint.
//!
//! Counting conventions:
//! * dense and conv outputs are accumulated as `y = b + w_1 x_1 + w_2 x_2 + ...`
//!   in index order (conv taps ordered channel, row, column), which gives
//!   `2 * in * out` operations per dense layer;
//! * ReLU, pooling and the recurrent gate non-linearities count one op per element;
//! * one LIF neuron step is `beta * U`, `+ I`, `S * theta` and the reset subtraction.
//!
//! Effective FLOPs drop a multiplication when either operand is exactly 0 and
//! an addition when both operands are exactly 0. Element-wise ops outside
//! dense/conv/LIF arithmetic are always counted. Sequence-wide head costs are
//! divided by the number of frames when reported per frame.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::{Head, Model, ModelKind, ModelSpec};
use crate::nn::{Layer, Tensor};
use crate::radar_dsp::RdSequence;
use crate::snn::{LifLayer, LifState};

const MB: f64 = (1u64 << 20) as f64;

/// Operation tally of one forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub mults: u64,
    pub adds: u64,
    /// Element-wise ops that are never excluded.
    pub other: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.mults + self.adds + self.other
    }
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, o: Self) {
        self.mults += o.mults;
        self.adds += o.adds;
        self.other += o.other;
    }
}

/// Dense FLOPs of one forward pass, split into encoder and head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopCount {
    pub encoder_per_frame: u64,
    pub head_per_sequence: u64,
    pub seq_len: usize,
}

impl FlopCount {
    pub fn per_frame(&self) -> f64 {
        self.encoder_per_frame as f64 + self.head_per_sequence as f64 / self.seq_len as f64
    }
}

fn dense_flops(i: usize, o: usize) -> u64 {
    2 * (i * o) as u64
}

/// Closed-form dense FLOPs for a full-length sequence of `spec.seq_len` frames.
pub fn count_flops(spec: &ModelSpec) -> Result<FlopCount> {
    spec.validate()?;
    let mut enc = 0u64;
    let mut cin = 1;
    let mut s = spec.map_size;
    for &c in &spec.encoder_channels {
        let pos = (s * s) as u64;
        enc += 2 * 9 * (cin * c) as u64 * pos; // conv 3x3, same padding
        enc += 2 * c as u64 * pos; // relu + max pool (per input element)
        cin = c;
        s /= 2;
    }
    enc += (cin * s * s) as u64; // global average pool
    enc += dense_flops(cin, spec.feature_dim);

    let t = spec.seq_len as u64;
    let f = spec.feature_dim;
    let n = spec.n_classes;
    let head = match spec.kind {
        ModelKind::Cnn2d1d => {
            let [c1, c2] = spec.conv_channels;
            let [k1, k2] = spec.conv_kernels;
            2 * (k1 * f * c1) as u64 * t
                + c1 as u64 * t
                + 2 * (k2 * c1 * c2) as u64 * t
                + 2 * c2 as u64 * t // relu + time average
                + dense_flops(c2, spec.mlp_hidden)
                + spec.mlp_hidden as u64
                + dense_flops(spec.mlp_hidden, n)
        }
        ModelKind::Lstm => {
            let h = spec.rnn_hidden;
            t * (dense_flops(f + h, 4 * h) + 9 * h as u64) + dense_flops(h, n)
        }
        ModelKind::Gru => {
            let h = spec.rnn_hidden;
            t * (dense_flops(f, 3 * h) + dense_flops(h, 3 * h) + 11 * h as u64) + dense_flops(h, n)
        }
        ModelKind::Snn => {
            let mut dims = vec![f];
            dims.extend(&spec.snn_hidden);
            dims.push(n);
            t * dims.windows(2).map(|w| dense_flops(w[0], w[1]) + 4 * w[1] as u64).sum::<u64>()
        }
    };
    Ok(FlopCount {
        encoder_per_frame: enc,
        head_per_sequence: head,
        seq_len: spec.seq_len,
    })
}

/// Counts `y[r, j] = b[r] + sum_k w[r, k] x[k, j]` for `w: [m, k]`, `x: [k, p]`.
/// With `exclude` off every operation is counted.
pub fn count_matmul(w: &[f64], m: usize, k: usize, bias: Option<&[f64]>, x: &[f64], p: usize, exclude: bool) -> OpCount {
    debug_assert_eq!(w.len(), m * k);
    debug_assert_eq!(x.len(), k * p);
    if !exclude {
        return OpCount {
            mults: (m * k * p) as u64,
            adds: (m * k * p) as u64,
            other: 0,
        };
    }
    let nnz: Vec<u64> = x.chunks_exact(p.max(1)).map(|r| r.iter().filter(|&&v| v != 0.0).count() as u64).collect();
    let mut c = OpCount::default();
    let mut acc = vec![0.0; p];
    for r in 0..m {
        acc.fill(bias.map_or(0.0, |b| b[r]));
        for kk in 0..k {
            let wv = w[r * k + kk];
            let xr = &x[kk * p..(kk + 1) * p];
            if wv != 0.0 {
                c.mults += nnz[kk];
            }
            for (a, &xv) in acc.iter_mut().zip(xr) {
                let prod = wv * xv;
                if !(*a == 0.0 && prod == 0.0) {
                    c.adds += 1;
                }
                *a += prod;
            }
        }
    }
    c
}

fn transpose(v: &[f64], r: usize, c: usize) -> Vec<f64> {
    (0..c).flat_map(|j| (0..r).map(move |i| v[i * c + j])).collect()
}

/// Ops of one layer on input `x`, plus the layer output.
fn count_layer(layer: &Layer, x: &Tensor, exclude: bool) -> Result<(OpCount, Tensor)> {
    let y = layer.infer(x)?;
    let c = match layer {
        Layer::Dense(d) => {
            let (i, o) = (d.in_dim(), d.out_dim());
            let rows = x.numel() / i;
            let xt = transpose(x.values(), rows, i);
            count_matmul(d.weight.values(), o, i, Some(d.bias.values()), &xt, rows, exclude)
        }
        Layer::Conv2d(conv) => {
            let g = conv.geom(x)?;
            let cols = g.im2col(x.values());
            count_matmul(conv.weight.values(), conv.cout(), g.k(), Some(conv.bias.values()), &cols, g.positions(), exclude)
        }
        Layer::Conv1d(conv) => {
            let g = conv.geom(x)?;
            let cols = g.im2col(x.values());
            count_matmul(conv.weight.values(), conv.cout(), g.k(), Some(conv.bias.values()), &cols, g.positions(), exclude)
        }
        Layer::Activation(_) | Layer::AvgPool(_) | Layer::MaxPool(_) => OpCount {
            other: x.numel() as u64,
            ..OpCount::default()
        },
    };
    Ok((c, y))
}

/// LIF layer on spike/feature input `x: [T, in]`.
fn count_lif(layer: &LifLayer, x: &Tensor, exclude: bool) -> Result<(OpCount, Tensor)> {
    let (t_len, i) = (x.shape()[0], layer.in_dim());
    let n = layer.out_dim();
    let xt = transpose(x.values(), t_len, i);
    let mut c = count_matmul(layer.weight.values(), n, i, None, &xt, t_len, exclude);
    let cur = layer.currents(x)?;
    let (beta, theta) = (layer.beta.values(), layer.theta.values());
    let mut state = LifState::new(n);
    let mut spikes = Vec::with_capacity(t_len * n);
    for i_t in cur.chunks_exact(n) {
        let u_prev = state.u.clone();
        let (v, s) = state.step(layer, i_t);
        for k in 0..n {
            if !exclude {
                c.mults += 2;
                c.adds += 2;
                continue;
            }
            let bu = beta[k] * u_prev[k];
            c.mults += u64::from(beta[k] != 0.0 && u_prev[k] != 0.0);
            c.adds += u64::from(!(bu == 0.0 && i_t[k] == 0.0));
            let st = s[k] * theta[k];
            c.mults += u64::from(s[k] != 0.0 && theta[k] != 0.0);
            c.adds += u64::from(!(v[k] == 0.0 && st == 0.0));
        }
        spikes.extend(s);
    }
    Ok((c, Tensor::from_vec(&[t_len, n], spikes)?))
}

/// Instrumented forward pass over a whole sequence.
pub fn count_ops(model: &Model, seq: &RdSequence, exclude: bool) -> Result<OpCount> {
    let mut total = OpCount::default();
    let mut feats = Vec::new();
    for map in &seq.maps {
        let mut h = model.map_tensor(map)?;
        for l in &model.encoder {
            let (c, y) = count_layer(l, &h, exclude)?;
            total += c;
            h = y;
        }
        feats.extend(h.into_values());
    }
    let t_len = seq.len();
    if t_len == 0 {
        return Err(Error::Shape("empty sequence".into()));
    }
    let f = model.spec.feature_dim;
    let feats = Tensor::from_vec(&[t_len, f], feats)?;
    match &model.head {
        Head::Conv(layers) => {
            if t_len != model.spec.seq_len {
                return Err(Error::Shape(format!(
                    "conv head needs {} frames, got {t_len}",
                    model.spec.seq_len
                )));
            }
            let mut h = Tensor::from_vec(&[f, t_len], transpose(feats.values(), t_len, f))?;
            for l in layers {
                let (c, y) = count_layer(l, &h, exclude)?;
                total += c;
                h = y;
            }
        }
        Head::Lstm { cell, out } => {
            let hd = cell.hidden();
            let hs = cell.infer(&feats)?;
            let g4 = 4 * hd;
            let w: Vec<f64> = (0..g4)
                .flat_map(|j| {
                    cell.w_ih.values()[j * f..(j + 1) * f]
                        .iter()
                        .chain(&cell.w_hh.values()[j * hd..(j + 1) * hd])
                        .copied()
                })
                .collect();
            // Column t is [x_t; h_{t-1}].
            let mut cols = vec![0.0; (f + hd) * t_len];
            for t in 0..t_len {
                for k in 0..f {
                    cols[k * t_len + t] = feats.values()[t * f + k];
                }
                if t > 0 {
                    for k in 0..hd {
                        cols[(f + k) * t_len + t] = hs.values()[(t - 1) * hd + k];
                    }
                }
            }
            total += count_matmul(&w, g4, f + hd, Some(cell.bias.values()), &cols, t_len, exclude);
            total.other += (9 * hd * t_len) as u64;
            let last = &hs.values()[(t_len - 1) * hd..];
            total += count_matmul(out.weight.values(), out.out_dim(), hd, Some(out.bias.values()), last, 1, exclude);
        }
        Head::Gru { cell, out } => {
            let hd = cell.hidden();
            let hs = cell.infer(&feats)?;
            let g3 = 3 * hd;
            let xt = transpose(feats.values(), t_len, f);
            total += count_matmul(cell.w_ih.values(), g3, f, Some(cell.b_ih.values()), &xt, t_len, exclude);
            let mut prev = vec![0.0; hd * t_len];
            for t in 1..t_len {
                for k in 0..hd {
                    prev[k * t_len + t] = hs.values()[(t - 1) * hd + k];
                }
            }
            total += count_matmul(cell.w_hh.values(), g3, hd, Some(cell.b_hh.values()), &prev, t_len, exclude);
            total.other += (11 * hd * t_len) as u64;
            let last = &hs.values()[(t_len - 1) * hd..];
            total += count_matmul(out.weight.values(), out.out_dim(), hd, Some(out.bias.values()), last, 1, exclude);
        }
        Head::Snn(net) => {
            let mut h = feats;
            for l in &net.layers {
                let (c, y) = count_lif(l, &h, exclude)?;
                total += c;
                h = y;
            }
        }
    }
    Ok(total)
}

/// Effective FLOPs per frame of one sequence.
pub fn count_eflops(model: &Model, seq: &RdSequence) -> Result<f64> {
    Ok(count_ops(model, seq, true)?.total() as f64 / seq.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryReport {
    pub params: usize,
    pub params_mb: f64,
    pub input_mb_frame: f64,
    pub input_mb_sequence: f64,
}

/// 32-bit storage sizes in MB (2^20 bytes).
pub fn memory_report(model: &Model) -> MemoryReport {
    let params = model.param_count();
    let frame = 4.0 * (model.spec.map_size * model.spec.map_size) as f64 / MB;
    MemoryReport {
        params,
        params_mb: 4.0 * params as f64 / MB,
        input_mb_frame: frame,
        input_mb_sequence: frame * model.spec.seq_len as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub kind: ModelKind,
    pub flops_per_frame: f64,
    pub eflops_mean: f64,
    pub eflops_std: f64,
    pub n_inputs: usize,
    pub memory: MemoryReport,
}

impl ComplexityReport {
    /// Evaluates effective FLOPs over `inputs` (mean and sample std per frame).
    pub fn build(model: &Model, inputs: &[RdSequence]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let e = inputs.iter().map(|s| count_eflops(model, s)).collect::<Result<Vec<_>>>()?;
        let (eflops_mean, eflops_std) = crate::eval::mean_std(&e);
        Ok(Self {
            kind: model.kind(),
            flops_per_frame: count_flops(&model.spec)?.per_frame(),
            eflops_mean,
            eflops_std,
            n_inputs: inputs.len(),
            memory: memory_report(model),
        })
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "flops_per_frame = {:.1}", self.flops_per_frame);
        let _ = writeln!(s, "eflops_per_frame_mean = {:.1}", self.eflops_mean);
        let _ = writeln!(s, "eflops_per_frame_std = {:.1}", self.eflops_std);
        let _ = writeln!(s, "eflops_inputs = {}", self.n_inputs);
        let _ = writeln!(s, "params = {}", self.memory.params);
        let _ = writeln!(s, "params_mb = {:.6}", self.memory.params_mb);
        let _ = writeln!(s, "input_mb_frame = {:.6}", self.memory.input_mb_frame);
        let _ = writeln!(s, "input_mb_sequence = {:.6}", self.memory.input_mb_sequence);
        s
    }
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    if syy == 0.0 {
        return Ok(1.0);
    }
    Ok(sxy * sxy / (sxx * syy))
}
