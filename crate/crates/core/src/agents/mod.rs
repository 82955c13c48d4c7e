//! Training algorithms: ε-greedy deep Q-learning with replay and a target
//! model, and REINFORCE policy gradient. Both drive parameter-shift
//! gradients through [`Adam`].

mod optimizer;
mod qlearning;
mod reinforce;
mod replay;
mod training;

pub use optimizer::{Adam, AdamConfig};
pub use qlearning::{
    q_loss_and_grad, q_target, q_targets, q_update_step, QAgent, QConfig, QTransition, SyncUnit, UpdateInfo,
};
pub use reinforce::{
    discounted_returns, log_policy_grad, reinforce_update, EpisodeStep, LogPolicyGrad, PgAgent, PgConfig,
};
pub use replay::ReplayBuffer;
pub use training::{
    evaluate, train, Agent, EpisodeRecord, EvalStats, TrainConfig, TrainingLog, UpdateRecord, SOLVED_WINDOW,
};

use serde::{Deserialize, Serialize};

use crate::ansatz::{ExecConfig, ShotBatch};
use crate::error::{QrlError, Result};
use crate::noise::ShotSetting;
use crate::qsim::Observable;
use crate::rng::RngStream;
use crate::shots::ShotLedger;

/// `ε(t) = max(end, start · decay^t)` with `t` counted in episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.01,
            decay: 0.99,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, episode: u64) -> f64 {
        let e = self.start * self.decay.powf(episode as f64);
        e.max(self.end)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.end)
            && self.end <= self.start
            && (0.0..=1.0).contains(&self.decay);
        if !ok {
            return Err(QrlError::Config(format!("invalid epsilon schedule {self:?}")));
        }
        Ok(())
    }
}

/// Exploration branch of ε-greedy: a uniform index in `0..n_actions` with
/// probability `epsilon`, drawn before any circuit is evaluated.
pub fn explore(epsilon: f64, n_actions: usize, rng: &mut RngStream) -> Result<Option<usize>> {
    if n_actions == 0 {
        return Err(QrlError::InvalidArgument("empty action set".into()));
    }
    if rng.uniform() < epsilon {
        Ok(Some(rng.below(n_actions)))
    } else {
        Ok(None)
    }
}

/// ε-greedy choice over `q`; greedy ties go to the lowest index.
pub fn select_action_egreedy(q: &[f64], epsilon: f64, rng: &mut RngStream) -> Result<usize> {
    Ok(match explore(epsilon, q.len(), rng)? {
        Some(a) => a,
        None => crate::shots::argmax(q),
    })
}

/// Adds shot batches of one estimation to the ledger.
pub(crate) fn record_batches(ledger: &mut ShotLedger, observables: &[Observable], batches: &[ShotBatch]) {
    for b in batches {
        let names: Vec<String> = b.observables.iter().map(|&k| observables[k].to_string()).collect();
        ledger.record_execution(&names, b.shots);
    }
}

/// Records the shifted evaluations of one parameter-shift gradient.
pub(crate) fn record_gradient(ledger: &mut ShotLedger, exec: &ExecConfig, observable: &Observable, evaluations: usize) {
    let m = match exec.noise.parts().shots {
        ShotSetting::Exact => return,
        ShotSetting::Fixed(m) => m,
        ShotSetting::Flexible(c) => c.m_max,
    };
    let name = [observable.to_string()];
    for _ in 0..evaluations {
        ledger.record_execution(&name, m);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn egreedy_cases() {
        let mut rng = RngStream::new(0, 0);
        assert_eq!(select_action_egreedy(&[0.2, 0.7], 0.0, &mut rng).unwrap(), 1);
        assert_eq!(select_action_egreedy(&[0.5, 0.5], 0.0, &mut rng).unwrap(), 0);
        assert!(select_action_egreedy(&[], 0.5, &mut rng).is_err());
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| select_action_egreedy(&[0.0, 1.0], 1.0, &mut rng).unwrap() == 1)
            .count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn epsilon_monotone() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0), 1.0);
        let mut prev = 1.0;
        for t in 0..1000 {
            let e = s.value(t);
            assert!(e <= prev && e >= 0.01);
            prev = e;
        }
        assert_eq!(s.value(1000), 0.01);
    }
}
