use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state; moment arrays mirror the parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, hyper: AdamHyper, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Optimizer {
            kind,
            hyper,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update in place. `grads` must mirror `params`.
    pub fn apply(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let AdamHyper { beta1, beta2, eps } = self.hyper;
                let c1 = 1.0 - beta1.powi(self.step as i32);
                let c2 = 1.0 - beta2.powi(self.step as i32);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = self.m[i].data_mut();
                    let v = self.v[i].data_mut();
                    for (j, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * d;
                        v[j] = beta2 * v[j] + (1.0 - beta2) * d * d;
                        let mh = m[j] / c1;
                        let vh = v[j] / c2;
                        *x -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Global L2 norm over every gradient coordinate.
pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: Option<f64>) -> f64 {
    let norm = global_norm(grads);
    if let Some(max) = max_norm {
        if norm > max && norm > 0.0 {
            let s = max / norm;
            for g in grads.iter_mut() {
                for v in g.data_mut() {
                    *v *= s;
                }
            }
        }
    }
    norm
}

/// Learning rate for the zero-based `epoch`: the last milestone whose epoch is
/// at most `epoch`, else `initial`.
pub fn lr_at(initial: f64, milestones: &[(usize, f64)], epoch: usize) -> f64 {
    milestones
        .iter()
        .take_while(|(e, _)| *e <= epoch)
        .last()
        .map_or(initial, |&(_, lr)| lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase() {
        let ms = [(150, 1e-5), (250, 5e-6)];
        assert_eq!(lr_at(1e-4, &ms, 0), 1e-4);
        assert_eq!(lr_at(1e-4, &ms, 149), 1e-4);
        assert_eq!(lr_at(1e-4, &ms, 150), 1e-5);
        assert_eq!(lr_at(1e-4, &ms, 249), 1e-5);
        assert_eq!(lr_at(1e-4, &ms, 250), 5e-6);
        assert_eq!(lr_at(1e-4, &ms, 299), 5e-6);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut g = vec![Tensor::vector(vec![3.0, 0.0]).unwrap(), Tensor::vector(vec![4.0]).unwrap()];
        assert_eq!(clip_global_norm(&mut g, Some(10.0)), 5.0);
        assert_eq!(g[0].data(), &[3.0, 0.0]);
        clip_global_norm(&mut g, Some(1.0));
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        assert!((g[1].data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_moves_each_coordinate_by_lr() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0]).unwrap()];
        let g = vec![Tensor::vector(vec![0.5, -3.0]).unwrap()];
        let mut opt = Optimizer::new(OptimizerKind::Adam, AdamHyper::default(), &p);
        opt.apply(&mut p, &g, 0.01);
        assert!((p[0].data()[0] - 0.99).abs() < 1e-9);
        assert!((p[0].data()[1] + 1.99).abs() < 1e-9);
    }

    /// f(x) = ½ xᵀ A x with A diagonal: one gradient step of size `lr` lowers f
    /// by lr·‖g‖² up to O(lr²).
    #[test]
    fn quadratic_probe_first_order() {
        let a = [1.0, 3.0, 0.5];
        let f = |x: &[f64]| 0.5 * x.iter().zip(&a).map(|(x, a)| a * x * x).sum::<f64>();
        let x0 = [0.7, -0.4, 1.2];
        let g: Vec<f64> = x0.iter().zip(&a).map(|(x, a)| a * x).collect();
        let g2: f64 = g.iter().map(|v| v * v).sum();
        for lr in [1e-3, 1e-4, 1e-5] {
            let mut p = vec![Tensor::vector(x0.to_vec()).unwrap()];
            let mut grads = vec![Tensor::vector(g.clone()).unwrap()];
            clip_global_norm(&mut grads, None);
            let mut opt = Optimizer::new(OptimizerKind::Sgd, AdamHyper::default(), &p);
            opt.apply(&mut p, &grads, lr);
            let drop = f(&x0) - f(p[0].data());
            let second_order: f64 = 0.5 * lr * lr * g.iter().zip(&a).map(|(g, a)| a * g * g).sum::<f64>();
            assert!((drop - (lr * g2 - second_order)).abs() < 1e-12);
            assert!((drop - lr * g2).abs() <= 2.0 * second_order + 1e-15);
        }
    }
}
