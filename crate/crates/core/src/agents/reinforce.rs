//! REINFORCE: Monte-Carlo policy-gradient ascent on a softmax policy head.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qlearning::UpdateInfo;
use super::{record_batches, record_gradient, Adam, AdamConfig};
use crate::ansatz::{estimate, policy_probs, softmax, AnsatzInput, AnsatzSpec, ExecConfig, HeadKind, ParamVector, ShotBatch};
use crate::error::{QrlError, Result};
use crate::gradients::{gradient, ScalarCircuitFunction};
use crate::qsim::Observable;
use crate::rng::RngStream;
use crate::shots::ShotLedger;

/// One step of a finished episode; `reward` follows `action`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub state: AnsatzInput,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgConfig {
    pub gamma: f64,
    /// Complete episodes per update.
    pub batch_episodes: usize,
    /// Constant subtracted from every return; `None` disables it.
    pub baseline: Option<f64>,
    pub adam: AdamConfig,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_episodes: 10,
            baseline: None,
            adam: AdamConfig::default(),
        }
    }
}

impl PgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(QrlError::Config(format!("gamma = {} must lie in [0, 1)", self.gamma)));
        }
        if self.batch_episodes == 0 {
            return Err(QrlError::Config("batch_episodes must be >= 1".into()));
        }
        Ok(())
    }
}

/// `G_t = Σ_{k≥t} γ^{k−t} r_k` for every step of one episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Score function `∇ log π(a|s)` at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolicyGrad {
    pub grad: ParamVector,
    pub log_prob: f64,
    /// Probabilities over the candidate actions, increasing by action.
    pub probs: Vec<f64>,
}

struct Score {
    value: LogPolicyGrad,
    observables: Vec<Observable>,
    batches: Vec<ShotBatch>,
    evaluations: Vec<usize>,
}

fn score(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input: &AnsatzInput,
    action: usize,
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<Score> {
    if spec.head_kind() != HeadKind::Policy {
        return Err(QrlError::InvalidArgument("ansatz has no policy head".into()));
    }
    spec.check_params(params)?;
    let actions = spec.actions(input);
    let ia = actions
        .iter()
        .position(|&a| a == action)
        .ok_or_else(|| QrlError::InvalidArgument(format!("action {action} is not valid here")))?;
    let obs = spec.observables(input, &actions);
    // e_b = offset_b + sign_b · ⟨O_{k_b}⟩
    let map: Vec<(usize, f64, f64)> = if obs.len() == 1 && actions.len() == 2 {
        vec![(0, 1.0, 0.0), (0, -1.0, 1.0)]
    } else if obs.len() == actions.len() {
        (0..actions.len()).map(|b| (b, 1.0, 0.0)).collect()
    } else {
        return Err(QrlError::InvalidArgument("observables do not cover the actions".into()));
    };
    let est = estimate(spec, &params.theta, input, &obs, exec, rng)?;
    let e: Vec<f64> = map.iter().map(|&(k, s, d)| d + s * est.values[k]).collect();
    let beta = params.head[0];
    let probs = softmax(&e, beta);
    let mut coef = vec![0.0; obs.len()];
    for (b, &(k, s, _)) in map.iter().enumerate() {
        let delta = if b == ia { 1.0 } else { 0.0 };
        coef[k] += s * (delta - probs[b]);
    }
    let mut grad = ParamVector {
        theta: vec![0.0; params.theta.len()],
        head: vec![0.0; params.head.len()],
    };
    let mut evaluations = vec![0; obs.len()];
    for (k, o) in obs.iter().enumerate() {
        if coef[k] == 0.0 {
            continue;
        }
        let f = ScalarCircuitFunction::new(spec, input.clone(), o.clone(), exec.clone())?;
        let g = gradient(&f, &params.theta, rng)?;
        evaluations[k] = 2 * f.shift_terms();
        for (acc, gi) in grad.theta.iter_mut().zip(g) {
            *acc += beta * coef[k] * gi;
        }
    }
    let mean_e: f64 = probs.iter().zip(&e).map(|(p, v)| p * v).sum();
    grad.head[0] = e[ia] - mean_e;
    Ok(Score {
        value: LogPolicyGrad {
            grad,
            log_prob: probs[ia].max(f64::MIN_POSITIVE).ln(),
            probs,
        },
        observables: obs,
        batches: est.batches,
        evaluations,
    })
}

fn record_score(ledger: &mut ShotLedger, exec: &ExecConfig, s: &Score) {
    record_batches(ledger, &s.observables, &s.batches);
    for (o, &n) in s.observables.iter().zip(&s.evaluations) {
        record_gradient(ledger, exec, o, n);
    }
}

/// `∇ log π(action|input)` via `β(∇e_a − Σ_b π_b ∇e_b)` and `∂/∂β = e_a − Σ_b π_b e_b`.
pub fn log_policy_grad(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input: &AnsatzInput,
    action: usize,
    exec: &ExecConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<LogPolicyGrad> {
    let s = score(spec, params, input, action, exec, rng)?;
    record_score(ledger, exec, &s);
    Ok(s.value)
}

#[derive(Debug, Clone)]
pub struct PgAgent {
    pub spec: AnsatzSpec,
    pub params: ParamVector,
    pub adam: Adam,
    pub config: PgConfig,
    /// Finished episodes waiting for the next update.
    pub pending: Vec<Vec<EpisodeStep>>,
}

impl PgAgent {
    pub fn new(spec: AnsatzSpec, params: ParamVector, config: PgConfig) -> Result<Self> {
        config.validate()?;
        spec.check_params(&params)?;
        if spec.head_kind() != HeadKind::Policy {
            return Err(QrlError::Config("policy gradient needs a policy ansatz".into()));
        }
        Ok(Self {
            adam: Adam::new(&spec, config.adam),
            spec,
            params,
            config,
            pending: Vec::new(),
        })
    }

    /// Samples an action from the softmax policy.
    pub fn act(
        &self,
        input: &AnsatzInput,
        exec: &ExecConfig,
        rng: &mut RngStream,
        ledger: &mut ShotLedger,
    ) -> Result<usize> {
        let p = policy_probs(&self.spec, &self.params, input, exec, rng)?;
        record_batches(ledger, &p.observables, &p.batches);
        let dist = WeightedIndex::new(&p.values)
            .map_err(|e| QrlError::InvalidArgument(format!("degenerate policy: {e}")))?;
        Ok(p.actions[dist.sample(rng)])
    }
}

/// One ascent step on `(1/B) Σ_episodes Σ_t γ^t (G_t − b) ∇ log π(a_t|s_t)`.
///
/// The reported loss is the negated surrogate objective.
pub fn reinforce_update(
    agent: &mut PgAgent,
    episodes: &[Vec<EpisodeStep>],
    exec: &ExecConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<UpdateInfo> {
    if episodes.is_empty() || episodes.iter().any(|e| e.is_empty()) {
        return Err(QrlError::InvalidArgument("empty episode batch".into()));
    }
    let gamma = agent.config.gamma;
    let b = agent.config.baseline.unwrap_or(0.0);
    let mut work: Vec<(&EpisodeStep, f64)> = Vec::new();
    for ep in episodes {
        let rewards: Vec<f64> = ep.iter().map(|s| s.reward).collect();
        let returns = discounted_returns(&rewards, gamma);
        for (t, (step, g)) in ep.iter().zip(returns).enumerate() {
            work.push((step, gamma.powi(t as i32) * (g - b)));
        }
    }
    let base = rng.fork();
    let (spec, params) = (&agent.spec, &agent.params);
    let scores: Vec<Score> = work
        .par_iter()
        .enumerate()
        .map(|(k, (step, _))| score(spec, params, &step.state, step.action, exec, &mut base.derive(k as u64)))
        .collect::<Result<_>>()?;
    let scale = 1.0 / episodes.len() as f64;
    // descent direction for the optimizer: minus the ascent gradient
    let mut grad = ParamVector {
        theta: vec![0.0; params.theta.len()],
        head: vec![0.0; params.head.len()],
    };
    let mut loss = 0.0;
    for ((_, w), s) in work.iter().zip(&scores) {
        record_score(ledger, exec, s);
        loss -= scale * w * s.value.log_prob;
        for (acc, g) in grad.theta.iter_mut().zip(&s.value.grad.theta) {
            *acc -= scale * w * g;
        }
        for (acc, g) in grad.head.iter_mut().zip(&s.value.grad.head) {
            *acc -= scale * w * g;
        }
    }
    let grad_norm = grad.theta.iter().chain(&grad.head).map(|g| g * g).sum::<f64>().sqrt();
    agent.adam.step(&mut agent.params, &grad)?;
    Ok(UpdateInfo { loss, grad_norm })
}
