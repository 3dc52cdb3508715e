use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ParamSet;

/// Adam hyper-parameters. Defaults: lr 4e-4, β₁ 0.9, β₂ 0.999, ε 1e-8.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 4e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam with first/second moment buffers per parameter.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Result<Self> {
        if !(config.lr > 0.0) || !(config.eps > 0.0) || !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::parameter(format!("invalid Adam settings {config:?}")));
        }
        let zeros = |t: &super::Tensor<T>| if t.requires_grad() { vec![T::zero(); t.len()] } else { Vec::new() };
        let m = params.iter().map(|(_, _, t)| zeros(t)).collect::<Vec<_>>();
        Ok(Self { config, step: 0, v: m.clone(), m })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, index: usize) -> (&[T], &[T]) {
        (&self.m[index], &self.v[index])
    }

    /// Applies one update to every trainable parameter from its `grad`.
    pub fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        if self.m.len() != params.len() {
            return Err(Error::contract("optimizer state built for a different parameter set"));
        }
        let names: Vec<String> = params.iter().map(|(_, n, _)| n.to_string()).collect();
        for (i, t) in params.tensors_mut().iter().enumerate() {
            if t.requires_grad() && t.grad().is_none() {
                return Err(Error::contract(format!("parameter {} has no gradient", names[i])));
            }
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::one() - T::lit(c.beta1.powi(self.step as i32));
        let bc2 = T::one() - T::lit(c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for ((t, m), v) in params.tensors_mut().iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !t.requires_grad() {
                continue;
            }
            let (grad, data) = t.grad_and_data_mut();
            let grad = grad.expect("checked above");
            for (((theta, &g), mi), vi) in data.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
