//! Adam with separate learning rates per parameter group.

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzSpec, OptimizerSnapshot, ParamGroup, ParamVector};
use crate::error::{QrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr_rotation: f64,
    pub lr_input_scaling: f64,
    pub lr_head: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_rotation: 0.001,
            lr_input_scaling: 0.001,
            lr_head: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Rotation => self.lr_rotation,
            ParamGroup::InputScaling => self.lr_input_scaling,
            ParamGroup::Head => self.lr_head,
        }
    }
}

/// Moment state over circuit parameters followed by head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    lrs: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(spec: &AnsatzSpec, config: AdamConfig) -> Self {
        let mut lrs: Vec<f64> = spec.groups().iter().map(|g| config.lr(*g)).collect();
        lrs.extend(std::iter::repeat(config.lr_head).take(spec.n_head_params()));
        let n = lrs.len();
        Self {
            config,
            lrs,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step along `grad`, laid out like `params`.
    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        if grad.theta.len() != params.theta.len() || grad.head.len() != params.head.len() {
            return Err(QrlError::DimensionMismatch {
                expected: params.len(),
                got: grad.len(),
            });
        }
        if params.len() != self.m.len() {
            return Err(QrlError::DimensionMismatch {
                expected: self.m.len(),
                got: params.len(),
            });
        }
        self.step += 1;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let t = self.step as i32;
        let correction = (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
        let values = params.theta.iter_mut().chain(params.head.iter_mut());
        let grads = grad.theta.iter().chain(&grad.head);
        for (k, (p, &g)) in values.zip(grads).enumerate() {
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
            *p -= self.lrs[k] * correction * self.m[k] / (self.v[k].sqrt() + self.config.epsilon);
        }
        Ok(())
    }

    pub fn snapshot(&self) -> OptimizerSnapshot {
        OptimizerSnapshot {
            step: self.step,
            m: self.m.clone(),
            v: self.v.clone(),
        }
    }

    pub fn restore(&mut self, snap: &OptimizerSnapshot) -> Result<()> {
        if snap.m.len() != self.m.len() || snap.v.len() != self.v.len() {
            return Err(QrlError::DimensionMismatch {
                expected: self.m.len(),
                got: snap.m.len(),
            });
        }
        self.step = snap.step;
        self.m.clone_from(&snap.m);
        self.v.clone_from(&snap.v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build, AnsatzKind};

    #[test]
    fn first_step_moves_by_learning_rate() {
        let spec = build(AnsatzKind::HweQ, 2, 1).unwrap();
        let mut adam = Adam::new(&spec, AdamConfig::default());
        let mut p = ParamVector {
            theta: vec![0.0; spec.n_params()],
            head: vec![1.0; 2],
        };
        let g = ParamVector {
            theta: vec![2.0; spec.n_params()],
            head: vec![-3.0; 2],
        };
        adam.step(&mut p, &g).unwrap();
        for (v, grp) in p.theta.iter().zip(spec.groups()) {
            let lr = AdamConfig::default().lr(*grp);
            // ε in the denominator offsets the step by about lr · ε / sqrt(v)
            assert!((v + lr).abs() < 1e-8);
        }
        assert!((p.head[0] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let spec = build(AnsatzKind::Eqc, 3, 1).unwrap();
        let mut adam = Adam::new(&spec, AdamConfig::default());
        let mut p = ParamVector {
            theta: vec![0.5, 0.7],
            head: vec![1.0],
        };
        let before = p.clone();
        let zero = ParamVector {
            theta: vec![0.0; 2],
            head: vec![0.0],
        };
        adam.step(&mut p, &zero).unwrap();
        assert_eq!(p, before);
    }
}
