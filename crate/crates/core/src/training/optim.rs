use serde::{Deserialize, Serialize};

use crate::diffcore::ParameterStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First-order update rule with its running state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, store: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adam => store.ids().map(|id| vec![0.0; store.value(id).len()]).collect(),
        };
        Self {
            kind,
            lr,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update from the gradients accumulated in `store`.
    pub fn step(&mut self, store: &mut ParameterStore) {
        self.step += 1;
        let ids: Vec<_> = store.ids().collect();
        match self.kind {
            OptimizerKind::Sgd => {
                for id in ids {
                    let g = store.grad(id).values().to_vec();
                    for (w, g) in store.value_mut(id).values_mut().iter_mut().zip(g) {
                        *w -= self.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                for (p, id) in ids.into_iter().enumerate() {
                    let g = store.grad(id).values().to_vec();
                    let (m, v) = (&mut self.m[p], &mut self.v[p]);
                    let w = store.value_mut(id).values_mut();
                    for i in 0..g.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        w[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tensor;

    fn store_with_grad(g: f64) -> ParameterStore {
        let mut s = ParameterStore::new(0);
        let id = s.add("w", Tensor::row(vec![1.0, 2.0]));
        s.grad_mut(id).values_mut().fill(g);
        s
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut s = store_with_grad(0.5);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &s);
        opt.step(&mut s);
        let id = s.find("w").unwrap();
        assert_eq!(s.value(id).values(), &[0.95, 1.95]);
    }

    #[test]
    fn first_adam_step_has_learning_rate_magnitude() {
        let mut s = store_with_grad(-3.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, &s);
        opt.step(&mut s);
        let id = s.find("w").unwrap();
        let w = s.value(id).values();
        assert!((w[0] - 1.01).abs() < 1e-8);
        assert!((w[1] - 2.01).abs() < 1e-8);
    }
}
