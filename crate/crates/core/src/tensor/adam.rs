use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moments for one group of parameters.
///
/// Each parameter keeps its own step counter, incremented only on steps
/// where that parameter received a gradient.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    config: AdamConfig,
    params: Vec<ParamId>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: Vec<u64>,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>, params: Vec<ParamId>, config: AdamConfig) -> Self {
        let m: Vec<Vec<T>> = params
            .iter()
            .map(|&id| vec![T::zero(); store.get(id).numel()])
            .collect();
        let v = m.clone();
        let t = vec![0; params.len()];
        Self {
            config,
            params,
            m,
            v,
            t,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    /// Step counter of the `k`-th parameter of this group.
    pub fn steps(&self, k: usize) -> u64 {
        self.t[k]
    }

    /// One bias-corrected Adam update of every touched parameter.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        let lr = T::of(self.config.learning_rate);
        let b1 = T::of(self.config.beta1);
        let b2 = T::of(self.config.beta2);
        let eps = T::of(self.config.epsilon);
        let one = T::one();
        for (k, &id) in self.params.iter().enumerate() {
            if !store.touched(id) {
                continue;
            }
            let (values, grad) = store.get_mut(id).parts_mut();
            let Some(grad) = grad else { continue };
            self.t[k] += 1;
            let t = self.t[k] as i32;
            let c1 = one - b1.powi(t);
            let c2 = one - b2.powi(t);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
