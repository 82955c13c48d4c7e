//! Classical heads turning observable expectations into action values or
//! action probabilities.

use super::exec::{estimate, ExecConfig, Sampler, ShotBatch};
use super::{AnsatzInput, AnsatzSpec, ParamVector};
use crate::error::{QrlError, Result};
use crate::noise::ShotSetting;
use crate::qsim::Observable;
use crate::rng::RngStream;
use crate::shots::allocate_shots;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// `Q(s,a) = (⟨O_a⟩ + 1)/2 · w_a` with one weight per action.
    QPerAction,
    /// `Q(s,a) = w · ⟨O_a⟩` with one shared weight.
    QGlobal,
    /// `π(a|s) ∝ exp(β ⟨O_a⟩)`.
    Policy,
}

impl HeadKind {
    /// Action value from the expectation `o` of the action's observable.
    pub fn q_value(self, head: &[f64], action: usize, o: f64) -> f64 {
        match self {
            HeadKind::QPerAction => (o + 1.0) / 2.0 * head[action],
            HeadKind::QGlobal => head[0] * o,
            HeadKind::Policy => o,
        }
    }

    /// `∂Q/∂⟨O⟩` and the nonzero `∂Q/∂head[k]` entries.
    pub fn q_grad(self, head: &[f64], action: usize, o: f64) -> (f64, Vec<(usize, f64)>) {
        match self {
            HeadKind::QPerAction => (head[action] / 2.0, vec![(action, (o + 1.0) / 2.0)]),
            HeadKind::QGlobal => (head[0], vec![(0, o)]),
            HeadKind::Policy => (1.0, Vec::new()),
        }
    }
}

/// Numerically stable `softmax(β · x)`.
pub fn softmax(x: &[f64], beta: f64) -> Vec<f64> {
    let mx = x.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (beta * v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-action result of one head evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEstimate {
    /// Candidate actions, increasing.
    pub actions: Vec<usize>,
    /// Action expectations `⟨O_a⟩` aligned with `actions`.
    pub expectations: Vec<f64>,
    /// Q-values or probabilities aligned with `actions`.
    pub values: Vec<f64>,
    /// Measured observables; batch indices refer to this list.
    pub observables: Vec<Observable>,
    pub batches: Vec<ShotBatch>,
}

impl ActionEstimate {
    /// Action with the largest value; the lowest action on ties.
    pub fn greedy(&self) -> usize {
        self.actions[crate::shots::argmax(&self.values)]
    }
}

fn measure(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input: &AnsatzInput,
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<Observable>, Vec<f64>, Vec<ShotBatch>)> {
    spec.check_params(params)?;
    spec.check_input(input)?;
    let actions = spec.actions(input);
    if actions.is_empty() {
        return Err(QrlError::InvalidArgument("no valid action for this input".into()));
    }
    let obs = spec.observables(input, &actions);
    let mut rng = rng.fork();
    let (raw, batches) = match exec.noise.parts().shots {
        ShotSetting::Flexible(cfg) if obs.len() >= 2 => {
            let mut sampler = Sampler::new(spec, &params.theta, input, &[], &obs, exec, &mut rng)?;
            let mut batches = Vec::new();
            let alloc = allocate_shots(
                |m| {
                    batches.extend(sampler.top_up(m, &mut rng)?);
                    Ok(sampler.sampled_values())
                },
                &cfg,
            )?;
            (alloc.values, batches)
        }
        ShotSetting::Flexible(cfg) => {
            // a single candidate needs no separation test
            let mut sampler = Sampler::new(spec, &params.theta, input, &[], &obs, exec, &mut rng)?;
            let batches = sampler.top_up(cfg.m_init, &mut rng)?;
            (sampler.sampled_values(), batches)
        }
        _ => {
            let e = estimate(spec, &params.theta, input, &obs, exec, &mut rng)?;
            (e.values, e.batches)
        }
    };
    let expectations = if spec.head_kind() == HeadKind::Policy && obs.len() == 1 && actions.len() == 2 {
        vec![raw[0], 1.0 - raw[0]]
    } else {
        raw
    };
    Ok((actions, obs, expectations, batches))
}

/// Q-values of every candidate action.
pub fn q_values(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input: &AnsatzInput,
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<ActionEstimate> {
    let head = spec.head_kind();
    if head == HeadKind::Policy {
        return Err(QrlError::InvalidArgument("policy ansatz has no Q-values".into()));
    }
    let (actions, observables, expectations, batches) = measure(spec, params, input, exec, rng)?;
    let values = actions
        .iter()
        .zip(&expectations)
        .map(|(&a, &o)| head.q_value(&params.head, a, o))
        .collect();
    Ok(ActionEstimate {
        actions,
        expectations,
        values,
        observables,
        batches,
    })
}

/// Softmax action probabilities.
pub fn policy_probs(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input: &AnsatzInput,
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<ActionEstimate> {
    if spec.head_kind() != HeadKind::Policy {
        return Err(QrlError::InvalidArgument("ansatz has no policy head".into()));
    }
    let (actions, observables, expectations, batches) = measure(spec, params, input, exec, rng)?;
    let values = softmax(&expectations, params.head[0]);
    Ok(ActionEstimate {
        actions,
        expectations,
        values,
        observables,
        batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build, AnsatzKind, GraphInput};
    use crate::noise::NoiseConfig;
    use crate::shots::ShotAllocConfig;
    use std::f64::consts::PI;

    #[test]
    fn q_head_formula() {
        let h = HeadKind::QPerAction;
        assert_eq!(h.q_value(&[1.0, 1.0], 0, 1.0), 1.0);
        assert_eq!(h.q_value(&[7.0, 3.0], 1, -1.0), 0.0);
        assert_eq!(h.q_value(&[2.0, 2.0], 0, 0.0), 1.0);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.3, -0.8], 0.0), vec![0.5, 0.5]);
        let p = softmax(&[1.0, 0.0], 1.0);
        assert!((p[0] - std::f64::consts::E / (std::f64::consts::E + 1.0)).abs() < 1e-12);
        let p = softmax(&[0.2, 0.1], 1e4);
        assert!(p[0] > 1.0 - 1e-12);
    }

    #[test]
    fn policy_uses_complement() {
        let spec = build(AnsatzKind::HwePg, 4, 1).unwrap();
        let params = ParamVector {
            theta: vec![0.0; spec.n_params()],
            head: vec![1.0],
        };
        let input = AnsatzInput::Features(vec![0.0; 4]);
        let p = policy_probs(&spec, &params, &input, &ExecConfig::exact(), &mut RngStream::new(0, 0)).unwrap();
        // all angles zero: ⟨Z⊗4⟩ = 1
        assert_eq!(p.expectations, vec![1.0, 0.0]);
        assert!((p.values[0] - 0.7310585786300049).abs() < 1e-12);
        assert!(q_values(&spec, &params, &input, &ExecConfig::exact(), &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn tsp_masks_visited_cities() {
        let spec = build(AnsatzKind::Eqc, 5, 1).unwrap();
        let mut alpha = vec![PI; 5];
        alpha[0] = 0.0;
        alpha[3] = 0.0;
        let input = AnsatzInput::Graph(GraphInput {
            n: 5,
            weights: vec![0.5; 25],
            alpha,
            current: 3,
        });
        let params = ParamVector {
            theta: vec![0.4, 1.2],
            head: vec![2.0],
        };
        let q = q_values(&spec, &params, &input, &ExecConfig::exact(), &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(q.actions, vec![1, 2, 4]);
        assert_eq!(q.observables[0], Observable::z_string(&[3, 1]));
        for (v, e) in q.values.iter().zip(&q.expectations) {
            assert!((v - 2.0 * e).abs() < 1e-15);
        }
    }

    #[test]
    fn flexible_allocation_records_increments() {
        let spec = build(AnsatzKind::HweQ, 4, 1).unwrap();
        let params = ParamVector {
            theta: vec![0.0; spec.n_params()],
            head: vec![1.0, 1.0],
        };
        // identical observables' expectations: both 1, the gap never opens
        let input = AnsatzInput::Features(vec![0.0; 4]);
        let exec = ExecConfig::new(NoiseConfig::flexible(ShotAllocConfig::new(100, 100, 400).unwrap()));
        let q = q_values(&spec, &params, &input, &exec, &mut RngStream::new(0, 0)).unwrap();
        let total: u64 = q.batches.iter().map(|b| b.shots).sum();
        assert_eq!(total, 400);
        assert_eq!(q.greedy(), 0);
    }
}
