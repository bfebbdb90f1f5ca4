use fnv::FnvHashMap;

use super::config::Optimizer;
use crate::policy::{Policy, SparseVector};

/// Gradient-ascent optimizer state. Adam keeps moments only for features
/// that have received a gradient, and updates only those touched by the
/// current step.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    t: u64,
    m: FnvHashMap<u64, f64>,
    v: FnvHashMap<u64, f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(kind: Optimizer, lr: f64) -> OptimizerState {
        OptimizerState {
            kind,
            lr,
            t: 0,
            m: FnvHashMap::default(),
            v: FnvHashMap::default(),
        }
    }

    /// θ ← θ + step(g). Always bumps the policy version, even for g = 0.
    pub fn ascend(&mut self, policy: &mut Policy, g: &SparseVector) {
        match self.kind {
            Optimizer::Sgd => policy.add_scaled(g, self.lr),
            Optimizer::Adam => {
                self.t += 1;
                let c1 = 1.0 - BETA1.powi(self.t as i32);
                let c2 = 1.0 - BETA2.powi(self.t as i32);
                let mut delta = SparseVector::new();
                for (k, gk) in g.iter() {
                    let m = self.m.entry(k).or_insert(0.0);
                    *m = BETA1 * *m + (1.0 - BETA1) * gk;
                    let v = self.v.entry(k).or_insert(0.0);
                    *v = BETA2 * *v + (1.0 - BETA2) * gk * gk;
                    delta.add(k, (*m / c1) / ((*v / c2).sqrt() + EPS));
                }
                policy.add_scaled(&delta, self.lr);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [Optimizer::Sgd, Optimizer::Adam] {
            let mut p = Policy::default();
            p.set_param(3, 0.5);
            let before = p.params().clone();
            OptimizerState::new(kind, 0.1).ascend(&mut p, &SparseVector::new());
            assert_eq!(p.params(), &before);
            assert_eq!(p.version(), 2);
        }
    }

    #[test]
    fn first_adam_step_is_lr_times_sign() {
        let mut p = Policy::default();
        let g: SparseVector = [(1, 0.3), (2, -7.0)].into_iter().collect();
        OptimizerState::new(Optimizer::Adam, 0.01).ascend(&mut p, &g);
        assert!((p.param(1) - 0.01).abs() < 1e-9);
        assert!((p.param(2) + 0.01).abs() < 1e-9);
    }
}
