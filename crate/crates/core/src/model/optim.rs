//! First-order optimizers over [`Params`].

use serde::{Deserialize, Serialize};

use super::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, config: AdamConfig, m: Box<Params>, v: Box<Params>, step: u64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, like: &Params) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                config: AdamConfig::default(),
                m: Box::new(like.zeros_like()),
                v: Box::new(like.zeros_like()),
                step: 0,
            },
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        match self {
            Optimizer::Sgd { lr } => params.add_scaled(-*lr, grads),
            Optimizer::Adam { lr, config, m, v, step } => {
                *step += 1;
                let bc1 = 1.0 - config.beta1.powi(*step as i32);
                let bc2 = 1.0 - config.beta2.powi(*step as i32);
                let groups = params.slices_mut().into_iter().zip(grads.slices()).zip(m.slices_mut()).zip(v.slices_mut());
                for (((p, g), m), v) in groups {
                    for k in 0..p.len() {
                        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
                        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= *lr * m_hat / (v_hat.sqrt() + config.eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Dims;

    fn dims() -> Dims {
        Dims { input: 2, gcn_hidden: 2, seq_hidden: 1, seq_out: 2, cls_hidden: 2 }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut p = Params::init(dims(), 1);
            let before = p.clone();
            let mut opt = Optimizer::new(kind, 1e-2, &p);
            let g = p.zeros_like();
            opt.step(&mut p, &g);
            assert_eq!(p, before);
        }
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = Params::zeros(dims());
        let mut g = p.zeros_like();
        g.map_inplace(|_| 1.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3, &p);
        opt.step(&mut p, &g);
        // bias-corrected moments are exactly g and g^2 after one step
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!(p.slices().iter().flat_map(|s| s.iter()).all(|&x| (x - expected).abs() < 1e-18));
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = Params::zeros(dims());
        let mut g = p.zeros_like();
        g.map_inplace(|_| 2.0);
        Optimizer::new(OptimizerKind::Sgd, 0.5, &p).step(&mut p, &g);
        assert!(p.slices().iter().flat_map(|s| s.iter()).all(|&x| x == -1.0));
    }
}
