//! Reinforcement-learning environments: CartPole balancing and step-wise TSP
//! tour construction.

mod cartpole;
mod tsp;

pub use cartpole::{
    cartpole_reset, cartpole_step, CartPole, CartPoleConfig, CartPoleState, CARTPOLE_MAX_STEPS,
};
pub use tsp::{
    approximation_ratio, frozen_dataset, frozen_dataset_dir, generate_dataset, read_instance,
    tsp_generate_instance, tsp_optimal_tour, tsp_step, write_instance, TspDataset, TspEnv,
    TspEpisodeState, TspInstance, TspSampling, TSP_MAX_CITIES, TSP_MIN_CITIES,
};

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzInput;
use crate::error::Result;
use crate::rng::RngStream;

/// Record of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub done: bool,
}

/// Observation, reward and termination after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: AnsatzInput,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    CartPole,
    Tsp,
}

impl EnvKind {
    /// Whether a trailing-100 mean of the episode metric meets the benchmark bar.
    pub fn is_solved(self, trailing_mean: f64) -> bool {
        match self {
            EnvKind::CartPole => trailing_mean >= 195.0,
            EnvKind::Tsp => trailing_mean <= 1.05,
        }
    }

    /// Whether a larger episode metric is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, EnvKind::CartPole)
    }
}

/// Environment driven by the agents.
pub trait Environment {
    fn kind(&self) -> EnvKind;
    fn reset(&mut self, rng: &mut RngStream) -> Result<AnsatzInput>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
    /// Score (CartPole) or approximation ratio (TSP) of the finished episode.
    fn episode_metric(&self) -> Option<f64>;
}
