use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are matched to parameters by
/// position, so callers must pass parameters in a stable order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from its accumulated gradient.
    /// Parameters without a gradient buffer are left untouched. Updated
    /// values are rounded to f32.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![0.0; p.numel()], vec![0.0; p.numel()]))
                .collect();
        }
        if self.moments.len() != params.len()
            || self.moments.iter().zip(params.iter()).any(|(m, p)| m.0.len() != p.numel())
        {
            return Err(Error::Shape("adam: parameter list changed between steps".into()));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            if p.grad().is_none() {
                continue;
            }
            let (vals, grad) = p.split_mut();
            for i in 0..vals.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                vals[i] = (vals[i] - lr * mhat / (vhat.sqrt() + eps)) as f32 as f64;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(vals: &[f64], grad: &[f64]) -> Tensor {
        let mut t = Tensor::from_vec(&[vals.len()], vals.to_vec()).unwrap();
        t.grad_mut().copy_from_slice(grad);
        t
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = param(&[0.5, -0.25], &[0.0, 0.0]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.values(), &[0.5, -0.25]);
    }

    #[test]
    fn constant_gradient_step_is_about_lr() {
        // With a fixed gradient g the bias-corrected ratio mhat/sqrt(vhat)
        // is exactly sign(g), so every step moves by lr * |g| / (|g| + eps).
        let cfg = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg);
        let mut p = param(&[1.0], &[3.0]);
        let mut prev = 1.0;
        for _ in 0..200 {
            adam.step(&mut [&mut p]).unwrap();
            let step = prev - p.values()[0];
            let expect = cfg.lr * 3.0 / (3.0 + cfg.eps);
            assert!((step - expect).abs() < 1e-6, "step {step}");
            prev = p.values()[0];
        }
    }

    #[test]
    fn groups_are_independent() {
        let mut a = param(&[1.0], &[1.0]);
        let mut b = param(&[1.0], &[0.0]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut [&mut a, &mut b]).unwrap();
        assert!(a.values()[0] < 1.0);
        assert_eq!(b.values()[0], 1.0);
    }

    #[test]
    fn changed_parameter_list_is_rejected() {
        let mut a = param(&[1.0], &[1.0]);
        let mut b = param(&[1.0, 2.0], &[1.0, 1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut [&mut a]).unwrap();
        assert!(adam.step(&mut [&mut b]).is_err());
    }
}
