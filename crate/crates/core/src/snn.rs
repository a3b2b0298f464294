//! Leaky integrate-and-fire layers trained with surrogate gradients.
//!
//! Per step and neuron:
//!
//! ```text
//! V_t = beta * U_{t-1} + I_t        I_t = W x_t
//! S_t = H(V_t - theta)
//! U_t = V_t - S_t * theta           (reset by subtraction)
//! ```
//!
//! with `U_0 = 0`. Backward replaces `H'` by the arctan surrogate
//! [`surrogate_grad`]. In [`SpikeMode::Soft`] the forward pass uses the
//! smooth step whose exact derivative is that surrogate, which makes the
//! BPTT gradients checkable against finite differences.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::gemm::gemm;
use crate::nn::init::kaiming_uniform;
use crate::nn::{softmax_ce, Tensor};

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const BETA_INIT: f64 = 0.9;
pub const THETA_INIT: f64 = 1.0;
pub const BETA_MIN: f64 = 0.001;
pub const BETA_MAX: f64 = 0.999;
pub const THETA_MIN: f64 = 0.01;

/// Arctan pseudo-derivative `(alpha/2) / (1 + (pi*alpha*x/2)^2)`, `x = V - theta`.
pub fn surrogate_grad(x: f64, alpha: f64) -> f64 {
    let a = PI * alpha * x / 2.0;
    (alpha / 2.0) / (1.0 + a * a)
}

/// Nearest f32 to `x.clamp(lo, hi)`, nudged one ulp inward if rounding
/// left the interval.
fn f32_within(x: f64, lo: f64, hi: f64) -> f64 {
    let c = x.clamp(lo, hi);
    let mut r = c as f32;
    if (r as f64) < lo {
        r = f32::from_bits(r.to_bits() + 1);
    } else if (r as f64) > hi {
        r = f32::from_bits(r.to_bits() - 1);
    }
    r as f64
}

/// Smooth step `1/2 + atan(pi*alpha*x/2)/pi`; its derivative is [`surrogate_grad`].
pub fn soft_spike(x: f64, alpha: f64) -> f64 {
    0.5 + (PI * alpha * x / 2.0).atan() / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Hard,
    Soft,
}

/// Output of one layer over a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    /// `[T, out]`, binary in hard mode
    pub spikes: Tensor,
    /// Per-neuron spike totals.
    pub counts: Vec<f64>,
}

impl SpikeRecord {
    pub fn from_spikes(spikes: Tensor) -> Self {
        let out = spikes.shape()[1];
        let mut counts = vec![0.0; out];
        for row in spikes.values().chunks_exact(out) {
            counts.iter_mut().zip(row).for_each(|(c, s)| *c += s);
        }
        Self { spikes, counts }
    }

    /// Counts accumulated over the first `t` steps, for `t = 1..=T`.
    pub fn cumulative_counts(&self) -> Vec<Vec<f64>> {
        let out = self.spikes.shape()[1];
        let mut acc = vec![0.0; out];
        self.spikes
            .values()
            .chunks_exact(out)
            .map(|row| {
                acc.iter_mut().zip(row).for_each(|(c, s)| *c += s);
                acc.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct LifTrace {
    x: Vec<f64>,
    // Pre-spike membrane V, spikes S and post-reset U, each [T, out].
    v: Vec<f64>,
    s: Vec<f64>,
    u: Vec<f64>,
}

/// Dense LIF layer without bias; `beta` and `theta` are per-neuron and learnable.
#[derive(Debug, Clone)]
pub struct LifLayer {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub beta: Tensor,
    /// `[out]`
    pub theta: Tensor,
    pub alpha: f64,
    pub mode: SpikeMode,
    cache: Vec<LifTrace>,
}

impl LifLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: kaiming_uniform(&[out_dim, in_dim], in_dim, rng),
            beta: Tensor::scalar_fill(&[out_dim], BETA_INIT as f32 as f64),
            theta: Tensor::scalar_fill(&[out_dim], THETA_INIT as f32 as f64),
            alpha: DEFAULT_ALPHA,
            mode: SpikeMode::Hard,
            cache: Vec::new(),
        }
    }

    pub fn from_params(weight: Tensor, beta: Tensor, theta: Tensor) -> Result<Self> {
        let s = weight.shape();
        if s.len() != 2 || beta.shape() != [s[0]] || theta.shape() != [s[0]] {
            return Err(Error::Shape("lif: weight [out, in], beta [out], theta [out]".into()));
        }
        Ok(Self {
            weight,
            beta,
            theta,
            alpha: DEFAULT_ALPHA,
            mode: SpikeMode::Hard,
            cache: Vec::new(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Input currents `W x_t` for every step, `[T, out]`.
    pub fn currents(&self, x: &Tensor) -> Result<Vec<f64>> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.in_dim() || s[0] == 0 {
            return Err(Error::Shape(format!(
                "lif: expected [T>=1, {}], got {s:?}",
                self.in_dim()
            )));
        }
        let mut cur = vec![0.0; s[0] * self.out_dim()];
        gemm(s[0], self.in_dim(), self.out_dim(), 1.0, x.values(), false, self.weight.values(), true, 0.0, &mut cur);
        Ok(cur)
    }

    fn run(&self, x: &Tensor) -> Result<LifTrace> {
        let cur = self.currents(x)?;
        let n = self.out_dim();
        let mut state = LifState::new(n);
        let mut v = Vec::with_capacity(cur.len());
        let mut s = Vec::with_capacity(cur.len());
        let mut u = Vec::with_capacity(cur.len());
        for i_t in cur.chunks_exact(n) {
            let (vt, st) = state.step(self, i_t);
            v.extend_from_slice(&vt);
            s.extend_from_slice(&st);
            u.extend_from_slice(&state.u);
        }
        Ok(LifTrace {
            x: x.values().to_vec(),
            v,
            s,
            u,
        })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let tr = self.run(x)?;
        Tensor::from_vec(&[x.shape()[0], self.out_dim()], tr.s)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let tr = self.run(x)?;
        let out = Tensor::from_vec(&[x.shape()[0], self.out_dim()], tr.s.clone())?;
        self.cache.push(tr);
        Ok(out)
    }

    /// BPTT from the loss gradient on every output spike `[T, out]`.
    /// Accumulates into weight, beta and theta gradients; returns the input gradient.
    pub fn backward(&mut self, grad_spikes: &Tensor) -> Result<Tensor> {
        let tr = self
            .cache
            .pop()
            .ok_or_else(|| Error::State("lif: backward called without a matching forward".into()))?;
        let n = self.out_dim();
        let t_len = tr.v.len() / n;
        grad_spikes.expect_shape(&[t_len, n], "lif backward")?;
        let gs = grad_spikes.values();
        let beta = self.beta.values().to_vec();
        let theta = self.theta.values().to_vec();
        let mut d_i = vec![0.0; t_len * n];
        let mut d_beta = vec![0.0; n];
        let mut d_theta = vec![0.0; n];
        // Gradient reaching U_t from step t+1.
        let mut d_u = vec![0.0; n];
        for t in (0..t_len).rev() {
            for k in 0..n {
                let idx = t * n + k;
                let g = surrogate_grad(tr.v[idx] - theta[k], self.alpha);
                let d_s = gs[idx] - theta[k] * d_u[k];
                let d_v = d_u[k] + d_s * g;
                d_theta[k] += -tr.s[idx] * d_u[k] - d_s * g;
                let u_prev = if t > 0 { tr.u[idx - n] } else { 0.0 };
                d_beta[k] += d_v * u_prev;
                d_i[idx] = d_v;
                d_u[k] = d_v * beta[k];
            }
        }
        gemm(n, t_len, self.in_dim(), 1.0, &d_i, true, &tr.x, false, 1.0, self.weight.grad_mut());
        self.beta.grad_mut().iter_mut().zip(&d_beta).for_each(|(a, b)| *a += b);
        self.theta.grad_mut().iter_mut().zip(&d_theta).for_each(|(a, b)| *a += b);
        let mut dx = vec![0.0; t_len * self.in_dim()];
        gemm(t_len, n, self.in_dim(), 1.0, &d_i, false, self.weight.values(), false, 0.0, &mut dx);
        Tensor::from_vec(&[t_len, self.in_dim()], dx)
    }

    /// Projects beta into `[BETA_MIN, BETA_MAX]` and theta to `>= THETA_MIN`,
    /// staying on the f32 grid.
    pub fn clamp_params(&mut self) {
        for b in self.beta.values_mut() {
            *b = f32_within(*b, BETA_MIN, BETA_MAX);
        }
        for t in self.theta.values_mut() {
            *t = f32_within(*t, THETA_MIN, f64::MAX);
        }
    }

    /// Weight, beta, theta.
    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.beta, &self.theta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.beta, &mut self.theta]
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

/// Membrane state of one layer, for step-by-step simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub u: Vec<f64>,
}

impl LifState {
    pub fn new(n: usize) -> Self {
        Self { u: vec![0.0; n] }
    }

    pub fn reset(&mut self) {
        self.u.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Advances one step with input current `i_t`; returns `(V_t, S_t)`.
    pub fn step(&mut self, layer: &LifLayer, i_t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (beta, theta) = (layer.beta.values(), layer.theta.values());
        let mut v = vec![0.0; i_t.len()];
        let mut s = vec![0.0; i_t.len()];
        for k in 0..i_t.len() {
            v[k] = beta[k] * self.u[k] + i_t[k];
            s[k] = match layer.mode {
                SpikeMode::Hard => {
                    if v[k] >= theta[k] {
                        1.0
                    } else {
                        0.0
                    }
                }
                SpikeMode::Soft => soft_spike(v[k] - theta[k], layer.alpha),
            };
            self.u[k] = v[k] - s[k] * theta[k];
        }
        (v, s)
    }
}

/// Single LIF update on an already-projected current; returns the spikes.
pub fn lif_step(layer: &LifLayer, state: &mut LifState, input_current: &[f64]) -> Result<Vec<f64>> {
    if input_current.len() != layer.out_dim() || state.u.len() != layer.out_dim() {
        return Err(Error::Shape(format!(
            "lif_step: layer has {} neurons, current {}, state {}",
            layer.out_dim(),
            input_current.len(),
            state.u.len()
        )));
    }
    Ok(state.step(layer, input_current).1)
}

/// Stack of LIF layers; features enter the first layer as direct current.
#[derive(Debug, Clone)]
pub struct SpikingNet {
    pub layers: Vec<LifLayer>,
}

impl SpikingNet {
    /// `dims = [in, h1, ..., out]`
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Self {
        Self {
            layers: dims.windows(2).map(|w| LifLayer::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn set_mode(&mut self, mode: SpikeMode) {
        self.layers.iter_mut().for_each(|l| l.mode = mode);
    }

    pub fn infer(&self, x: &Tensor) -> Result<SpikeRecord> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(SpikeRecord::from_spikes(h))
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<SpikeRecord> {
        let mut h = x.clone();
        for l in self.layers.iter_mut() {
            h = l.forward(&h)?;
        }
        Ok(SpikeRecord::from_spikes(h))
    }

    /// Backward from a gradient on the output counts; every step's output
    /// spike receives the same count gradient.
    pub fn backward_counts(&mut self, grad_counts: &[f64], t_len: usize) -> Result<Tensor> {
        let g: Vec<f64> = (0..t_len).flat_map(|_| grad_counts.iter().copied()).collect();
        let mut grad = Tensor::from_vec(&[t_len, grad_counts.len()], g)?;
        for l in self.layers.iter_mut().rev() {
            grad = l.backward(&grad)?;
        }
        Ok(grad)
    }

    pub fn clamp_params(&mut self) {
        self.layers.iter_mut().for_each(LifLayer::clamp_params);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(LifLayer::clear_cache);
    }
}

/// Cross-entropy over spike counts used as logits: `p = softmax(c)`,
/// `L = -sum y_i log p_i`. Returns the loss and `dL/dc`.
pub fn spike_rate_loss(counts: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    softmax_ce(counts, target)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
