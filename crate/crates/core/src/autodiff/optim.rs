use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::scalar::Scalar;

/// Bias-corrected Adam with coupled L2 weight decay (`g + wd * w`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Adam { lr, ..Adam::default() }
    }

    /// Updates every trainable parameter from its gradient, then zeroes all
    /// gradients.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) {
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (lr, eps, wd) = (T::of(self.lr), T::of(self.eps), T::of(self.weight_decay));
        for p in store.iter_mut() {
            if !p.trainable {
                continue;
            }
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = T::one() - T::of(self.beta1.powi(t));
            let c2 = T::one() - T::of(self.beta2.powi(t));
            let value = p.value.data_mut();
            let grad = p.grad.data();
            let m = p.adam_m.data_mut();
            let v = p.adam_v.data_mut();
            for i in 0..value.len() {
                let g = grad[i] + wd * value[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        store.zero_grads();
    }
}

/// Anything that owns the parameters an optimizer updates.
pub trait HasParams<T: Scalar> {
    fn param_store(&mut self) -> &mut ParamStore<T>;
}

impl<T: Scalar> HasParams<T> for ParamStore<T> {
    fn param_store(&mut self) -> &mut ParamStore<T> {
        self
    }
}

/// Outcome of one accumulated pass over a sample list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSteps {
    pub optimizer_steps: usize,
    pub mean_loss: f64,
}

/// Runs `forward_backward` on each sample (batch size 1), which must add
/// its gradients into the model's store and return the loss. Every `accumulation`
/// samples the summed gradients are scaled by the reciprocal of the count and
/// one Adam step is taken; a shorter tail batch uses its own count.
pub fn accumulate_then_step<T, M, S, E>(
    model: &mut M,
    adam: &Adam,
    samples: &[S],
    accumulation: usize,
    mut forward_backward: impl FnMut(&S, &mut M) -> Result<f64, E>,
) -> Result<EpochSteps, E>
where
    T: Scalar,
    M: HasParams<T>,
{
    assert!(accumulation >= 1, "accumulation must be at least 1");
    model.param_store().zero_grads();
    let mut steps = 0;
    let mut loss_sum = 0.0;
    for chunk in samples.chunks(accumulation) {
        for s in chunk {
            loss_sum += forward_backward(s, model)?;
        }
        let store = model.param_store();
        store.scale_grads(T::one() / T::of_usize(chunk.len()));
        adam.step(store);
        steps += 1;
    }
    Ok(EpochSteps {
        optimizer_steps: steps,
        mean_loss: if samples.is_empty() { 0.0 } else { loss_sum / samples.len() as f64 },
    })
}
