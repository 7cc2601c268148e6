//! Adam with bias correction and global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::policy_value::{Gradients, PolicyValueNet};
use super::NetError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.99,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(10.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
}

/// What a single optimizer step did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub grad_norm: f64,
    pub clipped: bool,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_count: usize) -> Self {
        Self {
            first_moment: vec![T::zero(); param_count],
            second_moment: vec![T::zero(); param_count],
            step_count: 0,
        }
    }

    pub fn for_net(net: &PolicyValueNet<T>) -> Self {
        Self::new(net.trainable_count())
    }

    /// Applies one update in place. A non-finite gradient leaves both the
    /// parameters and the optimizer state untouched.
    pub fn step(
        &mut self,
        net: &mut PolicyValueNet<T>,
        grads: &Gradients<T>,
        cfg: &AdamConfig,
    ) -> Result<StepReport, NetError> {
        let mut slices = net.trainable_slices_mut();
        let total: usize = slices.iter().map(|s| s.len()).sum();
        self.apply(&mut slices, &grads.flat, cfg, total)
    }

    /// Same update over arbitrary parameter slices laid out like `grads`.
    pub fn step_slices(&mut self, params: &mut [&mut [T]], grads: &[T], cfg: &AdamConfig) -> Result<StepReport, NetError> {
        let total: usize = params.iter().map(|s| s.len()).sum();
        self.apply(params, grads, cfg, total)
    }

    fn apply(&mut self, params: &mut [&mut [T]], grads: &[T], cfg: &AdamConfig, total: usize) -> Result<StepReport, NetError> {
        if total != grads.len() || self.first_moment.len() != total || self.second_moment.len() != total {
            return Err(NetError::Config(format!(
                "optimizer shape mismatch: {} params, {} grads, {} moments",
                total,
                grads.len(),
                self.first_moment.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NetError::NonFinite("gradient"));
        }
        let norm = grads.iter().map(|&g| g * g).sum::<T>().sqrt();
        let mut scale = T::one();
        let mut clipped = false;
        if let Some(c) = cfg.clip_norm {
            let c = T::lit(c);
            if norm > c {
                scale = c / norm;
                clipped = true;
            }
        }
        self.step_count += 1;
        let b1 = T::lit(cfg.beta1);
        let b2 = T::lit(cfg.beta2);
        let t = self.step_count as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let lr = T::lit(cfg.lr);
        let eps = T::lit(cfg.eps);
        let mut i = 0;
        for slice in params.iter_mut() {
            for p in slice.iter_mut() {
                let g = grads[i] * scale;
                let m = b1 * self.first_moment[i] + (T::one() - b1) * g;
                let v = b2 * self.second_moment[i] + (T::one() - b2) * g * g;
                self.first_moment[i] = m;
                self.second_moment[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
                i += 1;
            }
        }
        Ok(StepReport {
            grad_norm: norm.as_f64(),
            clipped,
        })
    }
}
