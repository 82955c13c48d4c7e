//! Episode loops for training and noisy evaluation, and their logs.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::qlearning::{q_update_step, QAgent, QTransition, SyncUnit};
use super::reinforce::{reinforce_update, EpisodeStep, PgAgent};
use crate::ansatz::{q_values, AnsatzSpec, Checkpoint, ExecConfig, ParamVector};
use crate::envs::{EnvKind, Environment};
use crate::error::{QrlError, Result};
use crate::gradients::mean_std;
use crate::rng::RngStream;
use crate::shots::ShotLedger;

/// Episodes in the trailing window of the solved test.
pub const SOLVED_WINDOW: usize = 100;

#[derive(Debug, Clone)]
pub enum Agent {
    Q(QAgent),
    Pg(PgAgent),
}

impl Agent {
    pub fn spec(&self) -> &AnsatzSpec {
        match self {
            Agent::Q(a) => &a.spec,
            Agent::Pg(a) => &a.spec,
        }
    }

    pub fn params(&self) -> &ParamVector {
        match self {
            Agent::Q(a) => &a.params,
            Agent::Pg(a) => &a.params,
        }
    }

    /// Online parameters with the optimizer moments.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let snap = match self {
            Agent::Q(a) => a.adam.snapshot(),
            Agent::Pg(a) => a.adam.snapshot(),
        };
        Checkpoint::new(self.spec(), self.params().clone(), Some(snap))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Maximum number of episodes.
    pub episodes: u64,
    /// Stop once the trailing mean of the episode metric meets the benchmark bar.
    pub stop_when_solved: bool,
    pub exec: ExecConfig,
}

/// One row per finished training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// CartPole score or TSP approximation ratio.
    pub metric: f64,
    pub total_return: f64,
    pub steps: u64,
    pub epsilon: f64,
    pub shots_reads: u64,
    pub shots_executions: u64,
}

/// One row per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: u64,
    pub episode: u64,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
    /// First episode whose trailing window met the bar.
    pub solved_at: Option<u64>,
    /// Excluded from equality and serialization so that equal seeds give equal logs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl PartialEq for TrainingLog {
    fn eq(&self, other: &Self) -> bool {
        self.episodes == other.episodes && self.updates == other.updates && self.solved_at == other.solved_at
    }
}

impl TrainingLog {
    pub fn metrics(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.metric).collect()
    }

    /// Mean metric over the last `window` episodes.
    pub fn trailing_mean(&self, window: usize) -> Option<f64> {
        if self.episodes.len() < window || window == 0 {
            return None;
        }
        let tail = &self.episodes[self.episodes.len() - window..];
        Some(tail.iter().map(|e| e.metric).sum::<f64>() / window as f64)
    }

    pub fn write_episodes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.episodes {
            wr.serialize(e)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_updates_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for u in &self.updates {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn check_pairing(agent: &Agent, env: &dyn Environment) -> Result<()> {
    use crate::ansatz::AnsatzKind;
    let ok = matches!(
        (agent.spec().kind(), env.kind()),
        (AnsatzKind::HweQ | AnsatzKind::HwePg, EnvKind::CartPole) | (AnsatzKind::Eqc, EnvKind::Tsp)
    );
    if !ok {
        return Err(QrlError::Config(format!(
            "{:?} ansatz cannot drive the {:?} environment",
            agent.spec().kind(),
            env.kind()
        )));
    }
    Ok(())
}

/// Runs training episodes until the budget is spent or, optionally, the task is solved.
///
/// Every circuit evaluation uses `config.exec`. Shots go to `ledger`.
pub fn train(
    agent: &mut Agent,
    env: &mut dyn Environment,
    config: &TrainConfig,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<TrainingLog> {
    check_pairing(agent, env)?;
    config.exec.validate()?;
    let start = Instant::now();
    let mut log = TrainingLog::default();
    let mut total_steps = 0u64;
    for episode in 0..config.episodes {
        let before = ledger.summary().clone();
        let mut state = env.reset(rng)?;
        let mut total_return = 0.0;
        let mut steps = 0u64;
        let epsilon = match agent {
            Agent::Q(q) => q.config.epsilon.value(episode),
            Agent::Pg(_) => 0.0,
        };
        let mut trajectory = Vec::new();
        loop {
            ledger.set_position(episode, steps);
            let action = match agent {
                Agent::Q(q) => q.act(&state, epsilon, &config.exec, rng, ledger)?,
                Agent::Pg(p) => p.act(&state, &config.exec, rng, ledger)?,
            };
            let out = env.step(action)?;
            total_return += out.reward;
            steps += 1;
            total_steps += 1;
            match agent {
                Agent::Q(q) => {
                    q.buffer.push(QTransition {
                        state,
                        action,
                        reward: out.reward,
                        next_state: out.observation.clone(),
                        done: out.done,
                    });
                    if q.buffer.len() >= q.config.batch_size && total_steps % q.config.train_every == 0 {
                        let batch: Vec<QTransition> =
                            q.buffer.sample(q.config.batch_size, rng)?.into_iter().cloned().collect();
                        let refs: Vec<&QTransition> = batch.iter().collect();
                        let info = q_update_step(q, &refs, &config.exec, rng, ledger)?;
                        log.updates.push(UpdateRecord {
                            update: log.updates.len() as u64,
                            episode,
                            loss: info.loss,
                            grad_norm: info.grad_norm,
                        });
                    }
                    if q.config.target_sync_unit == SyncUnit::Steps && total_steps % q.config.target_sync_every == 0 {
                        q.sync_target();
                    }
                }
                Agent::Pg(_) => trajectory.push(EpisodeStep {
                    state,
                    action,
                    reward: out.reward,
                }),
            }
            state = out.observation;
            if out.done {
                break;
            }
        }
        match agent {
            Agent::Q(q) => {
                if q.config.target_sync_unit == SyncUnit::Episodes && (episode + 1) % q.config.target_sync_every == 0 {
                    q.sync_target();
                }
            }
            Agent::Pg(p) => {
                p.pending.push(trajectory);
                if p.pending.len() >= p.config.batch_episodes {
                    let batch = std::mem::take(&mut p.pending);
                    ledger.set_position(episode, steps);
                    let info = reinforce_update(p, &batch, &config.exec, rng, ledger)?;
                    log.updates.push(UpdateRecord {
                        update: log.updates.len() as u64,
                        episode,
                        loss: info.loss,
                        grad_norm: info.grad_norm,
                    });
                }
            }
        }
        let metric = env
            .episode_metric()
            .ok_or_else(|| QrlError::Environment("episode finished without a metric".into()))?;
        let after = ledger.summary();
        log.episodes.push(EpisodeRecord {
            episode,
            metric,
            total_return,
            steps,
            epsilon,
            shots_reads: after.total_reads - before.total_reads,
            shots_executions: after.total_executions - before.total_executions,
        });
        if let Some(m) = log.trailing_mean(SOLVED_WINDOW) {
            if log.solved_at.is_none() && env.kind().is_solved(m) {
                log.solved_at = Some(episode);
                if config.stop_when_solved {
                    break;
                }
            }
        }
    }
    log.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(log)
}

/// Mean and standard deviation of the episode metric over an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub metrics: Vec<f64>,
}

/// Runs `n_episodes` without learning: Q agents act greedily, policy agents
/// sample from their softmax.
pub fn evaluate(
    agent: &Agent,
    env: &mut dyn Environment,
    exec: &ExecConfig,
    n_episodes: usize,
    rng: &mut RngStream,
    ledger: &mut ShotLedger,
) -> Result<EvalStats> {
    check_pairing(agent, env)?;
    exec.validate()?;
    if n_episodes == 0 {
        return Err(QrlError::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let mut metrics = Vec::with_capacity(n_episodes);
    for episode in 0..n_episodes {
        let mut state = env.reset(rng)?;
        let mut step = 0u64;
        loop {
            ledger.set_position(episode as u64, step);
            let action = match agent {
                Agent::Q(q) => {
                    let est = q_values(&q.spec, &q.params, &state, exec, rng)?;
                    super::record_batches(ledger, &est.observables, &est.batches);
                    est.greedy()
                }
                Agent::Pg(p) => p.act(&state, exec, rng, ledger)?,
            };
            let out = env.step(action)?;
            step += 1;
            state = out.observation;
            if out.done {
                break;
            }
        }
        metrics.push(
            env.episode_metric()
                .ok_or_else(|| QrlError::Environment("episode finished without a metric".into()))?,
        );
    }
    let (mean, std) = mean_std(&metrics);
    Ok(EvalStats { mean, std, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{PgConfig, QConfig};
    use crate::ansatz::{build, AnsatzKind};
    use crate::envs::{generate_dataset, CartPole, CartPoleConfig, TspEnv, TspSampling};

    fn q_agent(seed: u64) -> Agent {
        let spec = build(AnsatzKind::HweQ, 4, 1).unwrap();
        let params = spec.init_params(&mut RngStream::new(seed, 0));
        let mut cfg = QConfig::cartpole();
        cfg.batch_size = 4;
        Agent::Q(QAgent::new(spec, params, cfg).unwrap())
    }

    fn cfg(episodes: u64) -> TrainConfig {
        TrainConfig {
            episodes,
            stop_when_solved: false,
            exec: ExecConfig::exact(),
        }
    }

    #[test]
    fn zero_budget_gives_empty_log() {
        let mut agent = q_agent(1);
        let mut env = CartPole::new(CartPoleConfig::default());
        let log = train(&mut agent, &mut env, &cfg(0), &mut RngStream::new(1, 1), &mut ShotLedger::new()).unwrap();
        assert!(log.episodes.is_empty() && log.updates.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut agent = q_agent(5);
            let mut env = CartPole::new(CartPoleConfig::default());
            let log = train(&mut agent, &mut env, &cfg(3), &mut RngStream::new(5, 1), &mut ShotLedger::new()).unwrap();
            (log, agent.params().clone())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        let idx: Vec<u64> = a.episodes.iter().map(|e| e.episode).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert!(!a.updates.is_empty());
    }

    #[test]
    fn target_changes_only_on_sync() {
        let spec = build(AnsatzKind::HweQ, 4, 1).unwrap();
        let params = spec.init_params(&mut RngStream::new(2, 0));
        let mut qc = QConfig::cartpole();
        qc.batch_size = 2;
        qc.target_sync_every = 1_000_000;
        let mut agent = Agent::Q(QAgent::new(spec, params.clone(), qc).unwrap());
        let mut env = CartPole::new(CartPoleConfig::default());
        train(&mut agent, &mut env, &cfg(2), &mut RngStream::new(2, 1), &mut ShotLedger::new()).unwrap();
        let Agent::Q(q) = &agent else { unreachable!() };
        assert_eq!(q.target, params);
        assert_ne!(q.params, params);
    }

    #[test]
    fn pg_updates_on_episode_batches() {
        let spec = build(AnsatzKind::HwePg, 4, 1).unwrap();
        let params = spec.init_params(&mut RngStream::new(3, 0));
        let pc = PgConfig {
            batch_episodes: 2,
            ..PgConfig::default()
        };
        let mut agent = Agent::Pg(PgAgent::new(spec, params, pc).unwrap());
        let mut env = CartPole::new(CartPoleConfig::default());
        let log = train(&mut agent, &mut env, &cfg(5), &mut RngStream::new(3, 1), &mut ShotLedger::new()).unwrap();
        assert_eq!(log.updates.len(), 2);
        assert_eq!(log.updates[0].episode, 1);
        assert_eq!(log.updates[1].episode, 3);
    }

    #[test]
    fn tsp_episode_and_evaluation() {
        let spec = build(AnsatzKind::Eqc, 5, 1).unwrap();
        let params = spec.init_params(&mut RngStream::new(4, 0));
        let mut qc = QConfig::tsp();
        qc.batch_size = 4;
        let mut agent = Agent::Q(QAgent::new(spec, params, qc).unwrap());
        let ds = generate_dataset(5, 3, 9).unwrap();
        let mut env = TspEnv::new(ds, TspSampling::Cycle).unwrap();
        let log = train(&mut agent, &mut env, &cfg(2), &mut RngStream::new(4, 1), &mut ShotLedger::new()).unwrap();
        assert!(log.episodes.iter().all(|e| e.metric >= 1.0 - 1e-12 && e.steps == 4));
        let stats = evaluate(&agent, &mut env, &ExecConfig::exact(), 3, &mut RngStream::new(4, 2), &mut ShotLedger::new())
            .unwrap();
        assert_eq!(stats.metrics.len(), 3);
    }

    #[test]
    fn mismatched_pairing_is_rejected() {
        let mut agent = q_agent(1);
        let ds = generate_dataset(5, 1, 9).unwrap();
        let mut env = TspEnv::new(ds, TspSampling::Cycle).unwrap();
        assert!(train(&mut agent, &mut env, &cfg(1), &mut RngStream::new(1, 1), &mut ShotLedger::new()).is_err());
    }

    #[test]
    fn csv_and_jsonl_writers() {
        let mut agent = q_agent(7);
        let mut env = CartPole::new(CartPoleConfig::default());
        let log = train(&mut agent, &mut env, &cfg(2), &mut RngStream::new(7, 1), &mut ShotLedger::new()).unwrap();
        let mut buf = Vec::new();
        log.write_episodes_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,metric,total_return,steps,epsilon,shots_reads,shots_executions"));
        assert_eq!(text.lines().count(), 3);
        let mut buf = Vec::new();
        log.write_updates_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), log.updates.len());
    }
}
