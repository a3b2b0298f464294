//! Layers with explicit forward/backward passes.
//!
//! `forward` pushes the activations needed for the gradient onto a per-layer
//! stack and `backward` pops them, so a layer shared across the frames of a
//! sequence is unwound in reverse order. `infer` computes the same output
//! without caching. Parameter gradients accumulate until `zero_grad`.

use rand::Rng;

use super::gemm::gemm;
use super::init::kaiming_uniform;
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum LayerKind {
    Dense = 0,
    Conv1d = 1,
    Conv2d = 2,
    Relu = 3,
    Sigmoid = 4,
    Tanh = 5,
    AvgPool = 6,
    MaxPool = 7,
    Lif = 8,
    Lstm = 9,
    Gru = 10,
}

impl LayerKind {
    pub fn from_u32(v: u32) -> Option<Self> {
        use LayerKind::*;
        Some(match v {
            0 => Dense,
            1 => Conv1d,
            2 => Conv2d,
            3 => Relu,
            4 => Sigmoid,
            5 => Tanh,
            6 => AvgPool,
            7 => MaxPool,
            8 => Lif,
            9 => Lstm,
            10 => Gru,
            _ => return None,
        })
    }
}

fn missing_cache(layer: &str) -> Error {
    Error::State(format!("{layer}: backward called without a matching forward"))
}

/// Fully connected layer applied to the last axis: `y = x W^T + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    cache: Vec<Tensor>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: kaiming_uniform(&[out_dim, in_dim], in_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
            cache: Vec::new(),
        }
    }

    pub fn from_params(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::Shape("dense: weight [out, in] and bias [out]".into()));
        }
        Ok(Self {
            weight,
            bias,
            cache: Vec::new(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn rows(&self, x: &Tensor) -> Result<usize> {
        match x.shape().last() {
            Some(&d) if d == self.in_dim() => Ok(x.numel() / d),
            _ => Err(Error::Shape(format!(
                "dense: input {:?} does not end in {}",
                x.shape(),
                self.in_dim()
            ))),
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let rows = self.rows(x)?;
        let (i, o) = (self.in_dim(), self.out_dim());
        let mut y = vec![0.0; rows * o];
        gemm(rows, i, o, 1.0, x.values(), false, self.weight.values(), true, 0.0, &mut y);
        for row in y.chunks_exact_mut(o) {
            for (v, b) in row.iter_mut().zip(self.bias.values()) {
                *v += b;
            }
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = o;
        Tensor::from_vec(&shape, y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache.push(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.cache.pop().ok_or_else(|| missing_cache("dense"))?;
        let rows = self.rows(&x)?;
        let (i, o) = (self.in_dim(), self.out_dim());
        if grad_out.numel() != rows * o {
            return Err(Error::Shape(format!(
                "dense: grad {:?} does not match output rows {rows} x {o}",
                grad_out.shape()
            )));
        }
        let g = grad_out.values();
        gemm(o, rows, i, 1.0, g, true, x.values(), false, 1.0, self.weight.grad_mut());
        let bg = self.bias.grad_mut();
        for row in g.chunks_exact(o) {
            for (b, v) in bg.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![0.0; rows * i];
        gemm(rows, o, i, 1.0, g, false, self.weight.values(), false, 0.0, &mut dx);
        Tensor::from_vec(x.shape(), dx)
    }
}

/// Geometry of a stride-1 convolution over a `[cin, h, w]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.ph + 1 - self.kh
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pw + 1 - self.kw
    }

    pub fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Patch matrix `[cin*kh*kw, out_h*out_w]`; row index is
    /// `(ci * kh + ky) * kw + kx`, out-of-bounds taps are zero.
    pub fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (oh, ow) = (self.out_h(), self.out_w());
        let p = oh * ow;
        let mut cols = vec![0.0; self.k() * p];
        for ci in 0..self.cin {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = ((ci * self.kh + ky) * self.kw + kx) * p;
                    let (x_lo, x_hi) = self.valid_range(kx, self.pw, self.w, ow);
                    for oy in 0..oh {
                        let iy = oy as isize + ky as isize - self.ph as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let src = ci * self.h * self.w + iy as usize * self.w;
                        let dst = row + oy * ow;
                        for ox in x_lo..x_hi {
                            cols[dst + ox] = x[src + ox + kx - self.pw];
                        }
                    }
                }
            }
        }
        cols
    }

    /// Inverse scatter-add of [`im2col`].
    pub fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let (oh, ow) = (self.out_h(), self.out_w());
        let p = oh * ow;
        let mut x = vec![0.0; self.cin * self.h * self.w];
        for ci in 0..self.cin {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = ((ci * self.kh + ky) * self.kw + kx) * p;
                    let (x_lo, x_hi) = self.valid_range(kx, self.pw, self.w, ow);
                    for oy in 0..oh {
                        let iy = oy as isize + ky as isize - self.ph as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = ci * self.h * self.w + iy as usize * self.w;
                        let src = row + oy * ow;
                        for ox in x_lo..x_hi {
                            x[dst + ox + kx - self.pw] += cols[src + ox];
                        }
                    }
                }
            }
        }
        x
    }

    /// Output columns `ox` whose tap `kx` lands inside the input.
    fn valid_range(&self, kx: usize, pad: usize, w: usize, ow: usize) -> (usize, usize) {
        let lo = pad.saturating_sub(kx);
        let hi = (w + pad).saturating_sub(kx).min(ow);
        (lo, hi.max(lo))
    }
}

#[derive(Debug, Clone)]
struct ConvCache {
    // The input rather than its patch matrix: recomputing im2col is cheap
    // and keeps a 15-frame cache several times smaller.
    x: Vec<f64>,
    in_shape: Vec<usize>,
}

/// Shared im2col machinery; `weight` is viewed as `[cout, K]`.
fn conv_forward(weight: &Tensor, bias: &Tensor, geom: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let cout = bias.numel();
    let cols = geom.im2col(x);
    let p = geom.positions();
    let mut y = vec![0.0; cout * p];
    gemm(cout, geom.k(), p, 1.0, weight.values(), false, &cols, false, 0.0, &mut y);
    for (row, b) in y.chunks_exact_mut(p).zip(bias.values()) {
        row.iter_mut().for_each(|v| *v += b);
    }
    y
}

fn conv_backward(
    weight: &mut Tensor,
    bias: &mut Tensor,
    geom: &ConvGeom,
    x: &[f64],
    g: &[f64],
    input_grad: bool,
) -> Option<Vec<f64>> {
    let cols = geom.im2col(x);
    let cout = bias.numel();
    let p = geom.positions();
    let k = geom.k();
    gemm(cout, p, k, 1.0, g, false, &cols, true, 1.0, weight.grad_mut());
    for (b, row) in bias.grad_mut().iter_mut().zip(g.chunks_exact(p)) {
        *b += row.iter().sum::<f64>();
    }
    if !input_grad {
        return None;
    }
    let mut dcols = vec![0.0; k * p];
    gemm(k, cout, p, 1.0, weight.values(), true, g, false, 0.0, &mut dcols);
    Some(geom.col2im(&dcols))
}

/// Stride-1 2D convolution (cross-correlation) with square kernel and
/// symmetric zero padding. Input `[cin, h, w]`, output `[cout, oh, ow]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    /// `[cout, cin, k, k]`
    pub weight: Tensor,
    /// `[cout]`
    pub bias: Tensor,
    pub padding: usize,
    /// Skip the input gradient (first layer of a network); `backward` then
    /// returns zeros.
    pub skip_input_grad: bool,
    cache: Vec<ConvCache>,
}

impl Conv2d {
    pub fn new(cin: usize, cout: usize, kernel: usize, padding: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: kaiming_uniform(&[cout, cin, kernel, kernel], cin * kernel * kernel, rng),
            bias: Tensor::zeros(&[cout]),
            padding,
            skip_input_grad: false,
            cache: Vec::new(),
        }
    }

    pub fn cin(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn cout(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub(crate) fn geom(&self, x: &Tensor) -> Result<ConvGeom> {
        let s = x.shape();
        if s.len() != 3 || s[0] != self.cin() {
            return Err(Error::Shape(format!(
                "conv2d: expected [{}, h, w], got {s:?}",
                self.cin()
            )));
        }
        let k = self.kernel();
        if s[1] + 2 * self.padding < k || s[2] + 2 * self.padding < k {
            return Err(Error::Shape(format!("conv2d: input {s:?} smaller than kernel {k}")));
        }
        Ok(ConvGeom {
            cin: s[0],
            h: s[1],
            w: s[2],
            kh: k,
            kw: k,
            ph: self.padding,
            pw: self.padding,
        })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geom(x)?;
        let y = conv_forward(&self.weight, &self.bias, &g, x.values());
        Tensor::from_vec(&[self.cout(), g.out_h(), g.out_w()], y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let g = self.geom(x)?;
        let y = conv_forward(&self.weight, &self.bias, &g, x.values());
        self.cache.push(ConvCache {
            x: x.values().to_vec(),
            in_shape: x.shape().to_vec(),
        });
        Tensor::from_vec(&[self.cout(), g.out_h(), g.out_w()], y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let c = self.cache.pop().ok_or_else(|| missing_cache("conv2d"))?;
        let g = self.geom(&Tensor::zeros(&c.in_shape))?;
        grad_out.expect_shape(&[self.cout(), g.out_h(), g.out_w()], "conv2d backward")?;
        let dx = conv_backward(
            &mut self.weight,
            &mut self.bias,
            &g,
            &c.x,
            grad_out.values(),
            !self.skip_input_grad,
        );
        match dx {
            Some(dx) => Tensor::from_vec(&c.in_shape, dx),
            None => Ok(Tensor::zeros(&c.in_shape)),
        }
    }
}

/// Stride-1 1D convolution with "same" zero padding (odd kernels).
/// Input `[cin, t]`, output `[cout, t]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    /// `[cout, cin, k]`
    pub weight: Tensor,
    /// `[cout]`
    pub bias: Tensor,
    cache: Vec<ConvCache>,
}

impl Conv1d {
    pub fn new(cin: usize, cout: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: kaiming_uniform(&[cout, cin, kernel], cin * kernel, rng),
            bias: Tensor::zeros(&[cout]),
            cache: Vec::new(),
        }
    }

    pub fn cin(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn cout(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub(crate) fn geom(&self, x: &Tensor) -> Result<ConvGeom> {
        let s = x.shape();
        if s.len() != 2 || s[0] != self.cin() {
            return Err(Error::Shape(format!(
                "conv1d: expected [{}, t], got {s:?}",
                self.cin()
            )));
        }
        let k = self.kernel();
        Ok(ConvGeom {
            cin: s[0],
            h: 1,
            w: s[1],
            kh: 1,
            kw: k,
            ph: 0,
            pw: (k - 1) / 2,
        })
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geom(x)?;
        let y = conv_forward(&self.weight, &self.bias, &g, x.values());
        Tensor::from_vec(&[self.cout(), g.out_w()], y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let g = self.geom(x)?;
        let y = conv_forward(&self.weight, &self.bias, &g, x.values());
        self.cache.push(ConvCache {
            x: x.values().to_vec(),
            in_shape: x.shape().to_vec(),
        });
        Tensor::from_vec(&[self.cout(), g.out_w()], y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let c = self.cache.pop().ok_or_else(|| missing_cache("conv1d"))?;
        let g = self.geom(&Tensor::zeros(&c.in_shape))?;
        grad_out.expect_shape(&[self.cout(), g.out_w()], "conv1d backward")?;
        let dx = conv_backward(&mut self.weight, &mut self.bias, &g, &c.x, grad_out.values(), true)
            .expect("input grad requested");
        Tensor::from_vec(&c.in_shape, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone)]
pub struct Activation {
    pub kind: ActivationKind,
    // ReLU caches its input, sigmoid/tanh their output.
    cache: Vec<Tensor>,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Self {
            kind,
            cache: Vec::new(),
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => v.max(0.0),
            ActivationKind::Sigmoid => sigmoid(v),
            ActivationKind::Tanh => v.tanh(),
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Tensor::from_vec(x.shape(), x.values().iter().map(|&v| self.apply(v)).collect())
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache.push(match self.kind {
            ActivationKind::Relu => x.clone(),
            _ => y.clone(),
        });
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let c = self.cache.pop().ok_or_else(|| missing_cache("activation"))?;
        grad_out.expect_shape(c.shape(), "activation backward")?;
        let g = grad_out.values();
        let dx = match self.kind {
            ActivationKind::Relu => c
                .values()
                .iter()
                .zip(g)
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            ActivationKind::Sigmoid => c.values().iter().zip(g).map(|(&y, &g)| g * y * (1.0 - y)).collect(),
            ActivationKind::Tanh => c.values().iter().zip(g).map(|(&y, &g)| g * (1.0 - y * y)).collect(),
        };
        Tensor::from_vec(c.shape(), dx)
    }
}

/// 2x2 max pooling with stride 2 over `[c, h, w]` (odd edges dropped).
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    cache: Vec<(Vec<u32>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new() -> Self {
        Self { cache: Vec::new() }
    }

    fn run(&self, x: &Tensor) -> Result<(Tensor, Vec<u32>)> {
        let s = x.shape();
        if s.len() != 3 || s[1] < 2 || s[2] < 2 {
            return Err(Error::Shape(format!("maxpool: expected [c, h>=2, w>=2], got {s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (oh, ow) = (h / 2, w / 2);
        let xv = x.values();
        let mut y = Vec::with_capacity(c * oh * ow);
        let mut idx = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            let base = ch * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let i0 = base + 2 * oy * w + 2 * ox;
                    let mut best = i0;
                    for cand in [i0 + 1, i0 + w, i0 + w + 1] {
                        if xv[cand] > xv[best] {
                            best = cand;
                        }
                    }
                    y.push(xv[best]);
                    idx.push(best as u32);
                }
            }
        }
        Ok((Tensor::from_vec(&[c, oh, ow], y)?, idx))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run(x)?.0)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, idx) = self.run(x)?;
        self.cache.push((idx, x.shape().to_vec()));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (idx, shape) = self.cache.pop().ok_or_else(|| missing_cache("maxpool"))?;
        if grad_out.numel() != idx.len() {
            return Err(Error::Shape("maxpool backward: gradient size mismatch".into()));
        }
        let mut dx = vec![0.0; shape.iter().product()];
        for (&i, &g) in idx.iter().zip(grad_out.values()) {
            dx[i as usize] += g;
        }
        Tensor::from_vec(&shape, dx)
    }
}

impl Default for MaxPool2d {
    fn default() -> Self {
        Self::new()
    }
}

/// Mean over every axis but the first: `[c, ...] -> [c]`.
#[derive(Debug, Clone)]
pub struct AvgPool {
    cache: Vec<Vec<usize>>,
}

impl AvgPool {
    pub fn new() -> Self {
        Self { cache: Vec::new() }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() < 2 || x.numel() == 0 {
            return Err(Error::Shape(format!("avgpool: expected [c, ...], got {s:?}")));
        }
        let n = x.numel() / s[0];
        let y = x.values().chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
        Tensor::from_vec(&[s[0]], y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache.push(x.shape().to_vec());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.cache.pop().ok_or_else(|| missing_cache("avgpool"))?;
        grad_out.expect_shape(&shape[..1], "avgpool backward")?;
        let n = shape.iter().skip(1).product::<usize>();
        let mut dx = Vec::with_capacity(shape[0] * n);
        for &g in grad_out.values() {
            dx.extend(std::iter::repeat(g / n as f64).take(n));
        }
        Tensor::from_vec(&shape, dx)
    }
}

impl Default for AvgPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Feed-forward layer variants.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Conv2d(Conv2d),
    Activation(Activation),
    AvgPool(AvgPool),
    MaxPool(MaxPool2d),
}

impl Layer {
    pub fn relu() -> Self {
        Layer::Activation(Activation::new(ActivationKind::Relu))
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::Activation(a) => match a.kind {
                ActivationKind::Relu => LayerKind::Relu,
                ActivationKind::Sigmoid => LayerKind::Sigmoid,
                ActivationKind::Tanh => LayerKind::Tanh,
            },
            Layer::AvgPool(_) => LayerKind::AvgPool,
            Layer::MaxPool(_) => LayerKind::MaxPool,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.infer(x),
            Layer::Conv1d(l) => l.infer(x),
            Layer::Conv2d(l) => l.infer(x),
            Layer::Activation(l) => l.infer(x),
            Layer::AvgPool(l) => l.infer(x),
            Layer::MaxPool(l) => l.infer(x),
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::Conv2d(l) => l.forward(x),
            Layer::Activation(l) => l.forward(x),
            Layer::AvgPool(l) => l.forward(x),
            Layer::MaxPool(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.backward(grad_out),
            Layer::Conv1d(l) => l.backward(grad_out),
            Layer::Conv2d(l) => l.backward(grad_out),
            Layer::Activation(l) => l.backward(grad_out),
            Layer::AvgPool(l) => l.backward(grad_out),
            Layer::MaxPool(l) => l.backward(grad_out),
        }
    }

    /// Weight first, then bias.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Conv1d(l) => vec![&l.weight, &l.bias],
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        match self {
            Layer::Dense(l) => l.cache.clear(),
            Layer::Conv1d(l) => l.cache.clear(),
            Layer::Conv2d(l) => l.cache.clear(),
            Layer::Activation(l) => l.cache.clear(),
            Layer::AvgPool(l) => l.cache.clear(),
            Layer::MaxPool(l) => l.cache.clear(),
        }
    }
}

/// Runs layers in order.
pub fn forward_all(layers: &mut [Layer], x: &Tensor) -> Result<Tensor> {
    let mut h = x.clone();
    for l in layers.iter_mut() {
        h = l.forward(&h)?;
    }
    Ok(h)
}

pub fn infer_all(layers: &[Layer], x: &Tensor) -> Result<Tensor> {
    let mut h = x.clone();
    for l in layers {
        h = l.infer(&h)?;
    }
    Ok(h)
}

pub fn backward_all(layers: &mut [Layer], grad: &Tensor) -> Result<Tensor> {
    let mut g = grad.clone();
    for l in layers.iter_mut().rev() {
        g = l.backward(&g)?;
    }
    Ok(g)
}
