use std::collections::BTreeMap;

use crate::autodiff::{Gradients, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Adam with global-norm clipping. Moments are kept per parameter, so a
/// parameter that is never updated keeps no state.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    moments: BTreeMap<ParamId, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            moments: BTreeMap::new(),
        }
    }

    /// Updates `params` from `grads`; every other parameter is untouched.
    /// Returns the gradient norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, params: &[ParamId]) -> f64 {
        let norm = params
            .iter()
            .filter_map(|&id| grads.param(id))
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        let scale = if self.config.clip_norm > 0.0 && norm > self.config.clip_norm {
            self.config.clip_norm / norm
        } else {
            1.0
        };
        let c = self.config;
        for &id in params {
            let Some(g) = grads.param(id) else { continue };
            let value = store.value_mut(id).data_mut();
            let mo = self.moments.entry(id).or_insert_with(|| Moments {
                m: vec![0.0; value.len()],
                v: vec![0.0; value.len()],
                step: 0,
            });
            mo.step += 1;
            let bc1 = 1.0 - c.beta1.powi(mo.step);
            let bc2 = 1.0 - c.beta2.powi(mo.step);
            for i in 0..value.len() {
                let gi = g[i] * scale;
                mo.m[i] = c.beta1 * mo.m[i] + (1.0 - c.beta1) * gi;
                mo.v[i] = c.beta2 * mo.v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = mo.m[i] / bc1;
                let v_hat = mo.v[i] / bc2;
                value[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Tape, Tensor};

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.0, -2.0]));
        let frozen = store.add("f", Tensor::vector(vec![3.0]));
        let mut tape = Tape::new();
        let x = tape.param(&store, w);
        let y = tape.param(&store, frozen);
        let sx = tape.sum(x);
        let sy = tape.sum(y);
        let out = tape.add(sx, sy).unwrap();
        let grads = tape.backward(out).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        let norm = adam.step(&mut store, &grads, &[w]);
        assert!((norm - 2f64.sqrt()).abs() < 1e-12);
        let step = 1e-3 / (1.0 + 1e-8);
        assert!((store.value(w).data()[0] - (1.0 - step)).abs() < 1e-15);
        assert_eq!(store.value(frozen).data(), &[3.0]);
    }

    #[test]
    fn clipping_scales_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.0]));
        let mut tape = Tape::new();
        let x = tape.param(&store, w);
        let y = tape.scalar_mul(x, 100.0);
        let out = tape.sum(y);
        let grads = tape.backward(out).unwrap();
        let mut adam = Adam::new(AdamConfig {
            clip_norm: 5.0,
            ..AdamConfig::default()
        });
        assert_eq!(adam.step(&mut store, &grads, &[w]), 100.0);
        // Adam's first step is scale-free, so the sign is what survives.
        assert!(store.value(w).data()[0] < 0.0);
    }
}
