use crate::models::Params;

use super::{OptimizerKind, TrainConfig};

/// First-order optimizer over a flattened parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Adadelta { lr: f64, rho: f64, eps: f64, sq_grad: Vec<f64>, sq_step: Vec<f64> },
    Sgd { lr: f64, momentum: f64, velocity: Vec<f64> },
}

impl Optimizer {
    pub fn adadelta(lr: f64, rho: f64, eps: f64) -> Self {
        Optimizer::Adadelta { lr, rho, eps, sq_grad: Vec::new(), sq_step: Vec::new() }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Optimizer::Sgd { lr, momentum, velocity: Vec::new() }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        match cfg.optimizer {
            OptimizerKind::Adadelta => Self::adadelta(cfg.learning_rate, cfg.adadelta_rho, cfg.adadelta_eps),
            OptimizerKind::Sgd => Self::sgd(cfg.learning_rate, cfg.momentum),
        }
    }

    /// Applies one descent step along `grad`.
    pub fn step<P: Params>(&mut self, params: &mut P, grad: &P) {
        let g = grad.flatten();
        let mut p = params.flatten();
        match self {
            Optimizer::Adadelta { lr, rho, eps, sq_grad, sq_step } => {
                if sq_grad.len() != g.len() {
                    *sq_grad = vec![0.0; g.len()];
                    *sq_step = vec![0.0; g.len()];
                }
                for i in 0..g.len() {
                    sq_grad[i] = *rho * sq_grad[i] + (1.0 - *rho) * g[i] * g[i];
                    let delta = -((sq_step[i] + *eps).sqrt() / (sq_grad[i] + *eps).sqrt()) * g[i];
                    sq_step[i] = *rho * sq_step[i] + (1.0 - *rho) * delta * delta;
                    p[i] += *lr * delta;
                }
            }
            Optimizer::Sgd { lr, momentum, velocity } => {
                if velocity.len() != g.len() {
                    *velocity = vec![0.0; g.len()];
                }
                for i in 0..g.len() {
                    velocity[i] = *momentum * velocity[i] + g[i];
                    p[i] -= *lr * velocity[i];
                }
            }
        }
        params.unflatten(&p);
    }
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm<P: Params>(grad: &mut P, max_norm: f64) -> f64 {
    let norm = grad.sq_norm().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        grad.visit_mut("", &mut |_, m| m.scale(k));
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Linear;
    use crate::numerics::seeded_rng;

    #[test]
    fn zero_gradient_entries_stay_put() {
        let mut rng = seeded_rng(3);
        for mut opt in [Optimizer::adadelta(1.0, 0.95, 1e-8), Optimizer::sgd(0.1, 0.9)] {
            let mut p = Linear::new(3, 2, &mut rng);
            let before = p.flatten();
            let mut g = p.zeros_like();
            g.w.set(1, 2, 0.5);
            opt.step(&mut p, &g);
            let after = p.flatten();
            let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
            assert_eq!(changed, vec![5]);
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut rng = seeded_rng(3);
        let mut p = Linear::new(3, 2, &mut rng);
        let before = p.clone();
        let mut g = p.clone();
        g.scale_all(2.0);
        let mut opt = Optimizer::adadelta(0.0, 0.95, 1e-8);
        opt.step(&mut p, &g);
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut rng = seeded_rng(4);
        let mut g = Linear::new(10, 10, &mut rng);
        g.scale_all(100.0);
        let before = clip_grad_norm(&mut g, 5.0);
        assert!(before > 5.0);
        assert!((g.sq_norm().sqrt() - 5.0).abs() < 1e-9);
    }

    trait ScaleAll {
        fn scale_all(&mut self, k: f64);
    }

    impl<P: Params> ScaleAll for P {
        fn scale_all(&mut self, k: f64) {
            self.visit_mut("", &mut |_, m| m.scale(k));
        }
    }
}
