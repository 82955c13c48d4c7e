//! Deep Q-learning with a replay memory and a periodically synced target model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{explore, record_batches, record_gradient, Adam, AdamConfig, EpsilonSchedule, ReplayBuffer};
use crate::ansatz::{estimate, q_values, AnsatzInput, AnsatzSpec, ExecConfig, HeadKind, ParamVector, ShotBatch};
use crate::error::{QrlError, Result};
use crate::gradients::{gradient, ScalarCircuitFunction};
use crate::qsim::Observable;
use crate::rng::RngStream;
use crate::shots::ShotLedger;

#[derive(Debug, Clone, PartialEq)]
pub struct QTransition {
    pub state: AnsatzInput,
    pub action: usize,
    pub reward: f64,
    pub next_state: AnsatzInput,
    pub done: bool,
}

/// Unit of the target-model sync interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncUnit {
    Steps,
    Episodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QConfig {
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    pub target_sync_every: u64,
    pub target_sync_unit: SyncUnit,
    pub epsilon: EpsilonSchedule,
    pub adam: AdamConfig,
}

impl Default for QConfig {
    fn default() -> Self {
        Self::cartpole()
    }
}

impl QConfig {
    pub fn cartpole() -> Self {
        Self {
            gamma: 0.99,
            replay_capacity: 10_000,
            batch_size: 16,
            train_every: 1,
            target_sync_every: 30,
            target_sync_unit: SyncUnit::Steps,
            epsilon: EpsilonSchedule::default(),
            adam: AdamConfig::default(),
        }
    }

    pub fn tsp() -> Self {
        Self {
            gamma: 0.9,
            batch_size: 32,
            target_sync_every: 1,
            target_sync_unit: SyncUnit::Episodes,
            ..Self::cartpole()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(QrlError::Config(format!("gamma = {} must lie in [0, 1)", self.gamma)));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(QrlError::Config("need 1 <= batch_size <= replay_capacity".into()));
        }
        if self.train_every == 0 || self.target_sync_every == 0 {
            return Err(QrlError::Config("update intervals must be >= 1".into()));
        }
        self.epsilon.validate()
    }
}

/// `r` for terminal transitions, otherwise `r + γ · max_a Q_target(s', a)`.
pub fn q_target(reward: f64, done: bool, gamma: f64, max_next: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * max_next
    }
}

/// Bootstrapped targets for a batch, evaluated with the target parameters.
pub fn q_targets(
    spec: &AnsatzSpec,
    target: &ParamVector,
    batch: &[&QTransition],
    gamma: f64,
    exec: &ExecConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<Vec<f64>> {
    let base = rng.fork();
    let evals: Vec<Option<(f64, Vec<Observable>, Vec<ShotBatch>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            if t.done {
                return Ok(None);
            }
            let q = q_values(spec, target, &t.next_state, exec, &mut base.derive(k as u64))?;
            let mx = q.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Some((mx, q.observables, q.batches)))
        })
        .collect::<Result<_>>()?;
    Ok(batch
        .iter()
        .zip(evals)
        .map(|(t, e)| match e {
            None => q_target(t.reward, true, gamma, 0.0),
            Some((mx, obs, batches)) => {
                record_batches(ledger, &obs, &batches);
                q_target(t.reward, false, gamma, mx)
            }
        })
        .collect())
}

/// Mean squared TD error over `batch` and its gradient; the targets are constants.
pub fn q_loss_and_grad(
    spec: &AnsatzSpec,
    params: &ParamVector,
    batch: &[&QTransition],
    targets: &[f64],
    exec: &ExecConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<(f64, ParamVector)> {
    if batch.is_empty() || batch.len() != targets.len() {
        return Err(QrlError::InvalidArgument("batch and targets must be non-empty and aligned".into()));
    }
    let head = spec.head_kind();
    if head == HeadKind::Policy {
        return Err(QrlError::InvalidArgument("Q-learning needs a Q-value head".into()));
    }
    let base = rng.fork();
    type Item = (f64, Vec<f64>, Observable, Vec<ShotBatch>, usize);
    let items: Vec<Item> = batch
        .par_iter()
        .enumerate()
        .map(|(k, t)| -> Result<Item> {
            let mut r = base.derive(k as u64);
            let obs = spec.observables(&t.state, &[t.action]);
            if obs.is_empty() || !spec.actions(&t.state).contains(&t.action) {
                return Err(QrlError::InvalidArgument(format!("action {} is not valid here", t.action)));
            }
            let e = estimate(spec, &params.theta, &t.state, &obs, exec, &mut r)?;
            let f = ScalarCircuitFunction::new(spec, t.state.clone(), obs[0].clone(), exec.clone())?;
            let g = gradient(&f, &params.theta, &mut r)?;
            let evaluations = 2 * f.shift_terms();
            Ok((e.values[0], g, obs[0].clone(), e.batches, evaluations))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = ParamVector {
        theta: vec![0.0; params.theta.len()],
        head: vec![0.0; params.head.len()],
    };
    let mut loss = 0.0;
    for ((t, y), (o, g, obs, batches, evaluations)) in batch.iter().zip(targets).zip(items) {
        record_batches(ledger, std::slice::from_ref(&obs), &batches);
        record_gradient(ledger, exec, &obs, evaluations);
        let q = head.q_value(&params.head, t.action, o);
        let err = q - y;
        loss += scale * err * err;
        let (dq_do, dq_dhead) = head.q_grad(&params.head, t.action, o);
        for (acc, gi) in grad.theta.iter_mut().zip(&g) {
            *acc += scale * 2.0 * err * dq_do * gi;
        }
        for (k, d) in dq_dhead {
            grad.head[k] += scale * 2.0 * err * d;
        }
    }
    Ok((loss, grad))
}

/// Online model, target model, replay memory and optimizer.
#[derive(Debug, Clone)]
pub struct QAgent {
    pub spec: AnsatzSpec,
    pub params: ParamVector,
    pub target: ParamVector,
    pub buffer: ReplayBuffer<QTransition>,
    pub adam: Adam,
    pub config: QConfig,
}

impl QAgent {
    pub fn new(spec: AnsatzSpec, params: ParamVector, config: QConfig) -> Result<Self> {
        config.validate()?;
        spec.check_params(&params)?;
        if spec.head_kind() == HeadKind::Policy {
            return Err(QrlError::Config("Q-learning needs a Q-value ansatz".into()));
        }
        Ok(Self {
            adam: Adam::new(&spec, config.adam),
            buffer: ReplayBuffer::new(config.replay_capacity)?,
            target: params.clone(),
            spec,
            params,
            config,
        })
    }

    /// ε-greedy action; exploration evaluates no circuit.
    pub fn act(
        &self,
        input: &AnsatzInput,
        epsilon: f64,
        exec: &ExecConfig,
        rng: &mut RngStream,
        ledger: &mut ShotLedger,
    ) -> Result<usize> {
        let actions = self.spec.actions(input);
        if let Some(k) = explore(epsilon, actions.len(), rng)? {
            return Ok(actions[k]);
        }
        let q = q_values(&self.spec, &self.params, input, exec, rng)?;
        record_batches(ledger, &q.observables, &q.batches);
        Ok(q.greedy())
    }

    /// Copies the online parameters into the target model.
    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.params);
    }
}

/// Loss and gradient norm of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub loss: f64,
    pub grad_norm: f64,
}

/// One optimizer step on a replay batch.
pub fn q_update_step(
    agent: &mut QAgent,
    batch: &[&QTransition],
    exec: &ExecConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<UpdateInfo> {
    if batch.is_empty() {
        return Err(QrlError::InvalidArgument("empty update batch".into()));
    }
    let targets = q_targets(&agent.spec, &agent.target, batch, agent.config.gamma, exec, rng, ledger)?;
    let (loss, grad) = q_loss_and_grad(&agent.spec, &agent.params, batch, &targets, exec, rng, ledger)?;
    let grad_norm = grad.theta.iter().chain(&grad.head).map(|g| g * g).sum::<f64>().sqrt();
    agent.adam.step(&mut agent.params, &grad)?;
    Ok(UpdateInfo { loss, grad_norm })
}
