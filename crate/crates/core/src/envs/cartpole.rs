//! Cart-pole balancing with explicit-Euler dynamics and a 200-step cap.

use super::{EnvKind, Environment, StepOutcome, Transition};
use crate::ansatz::AnsatzInput;
use crate::error::{QrlError, Result};
use crate::rng::RngStream;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE: f64 = 10.0;
const TAU: f64 = 0.02;
const X_LIMIT: f64 = 2.4;
const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const CARTPOLE_MAX_STEPS: u32 = 200;
const VELOCITY_CLIP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: u32,
    pub done: bool,
}

impl CartPoleState {
    /// Encoder features `(x, ẋ, θ, θ̇)`; velocities clipped to `[−5, 5]` when `clip` is set.
    pub fn features(&self, clip: bool) -> Vec<f64> {
        let c = |v: f64| if clip { v.clamp(-VELOCITY_CLIP, VELOCITY_CLIP) } else { v };
        vec![self.x, c(self.x_dot), self.theta, c(self.theta_dot)]
    }
}

/// All four components uniform in `[−0.05, 0.05]`.
pub fn cartpole_reset(rng: &mut RngStream) -> CartPoleState {
    let mut u = || rng.uniform_range(-0.05, 0.05);
    CartPoleState {
        x: u(),
        x_dot: u(),
        theta: u(),
        theta_dot: u(),
        steps: 0,
        done: false,
    }
}

fn integrate(s: &CartPoleState, force: f64) -> CartPoleState {
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * s.theta_dot * s.theta_dot * sin) / TOTAL_MASS;
    let theta_acc =
        (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    CartPoleState {
        x: s.x + TAU * s.x_dot,
        x_dot: s.x_dot + TAU * x_acc,
        theta: s.theta + TAU * s.theta_dot,
        theta_dot: s.theta_dot + TAU * theta_acc,
        steps: s.steps + 1,
        done: false,
    }
}

/// One Euler step; action 1 pushes right, action 0 left. Every step earns reward 1.
pub fn cartpole_step(state: &CartPoleState, action: usize) -> Result<Transition<CartPoleState>> {
    if state.done {
        return Err(QrlError::Environment("step after episode end".into()));
    }
    let force = match action {
        0 => -FORCE,
        1 => FORCE,
        a => return Err(QrlError::Environment(format!("invalid CartPole action {a}"))),
    };
    let mut n = integrate(state, force);
    n.done = n.x.abs() > X_LIMIT || n.theta.abs() > THETA_LIMIT || n.steps >= CARTPOLE_MAX_STEPS;
    Ok(Transition {
        state: *state,
        action,
        reward: 1.0,
        next_state: n,
        done: n.done,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleConfig {
    pub clip_velocities: bool,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            clip_velocities: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    config: CartPoleConfig,
    state: Option<CartPoleState>,
}

impl CartPole {
    pub fn new(config: CartPoleConfig) -> Self {
        Self { config, state: None }
    }

    pub fn state(&self) -> Option<&CartPoleState> {
        self.state.as_ref()
    }
}

impl Environment for CartPole {
    fn kind(&self) -> EnvKind {
        EnvKind::CartPole
    }

    fn reset(&mut self, rng: &mut RngStream) -> Result<AnsatzInput> {
        let s = cartpole_reset(rng);
        self.state = Some(s);
        Ok(AnsatzInput::Features(s.features(self.config.clip_velocities)))
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let s = self
            .state
            .as_ref()
            .ok_or_else(|| QrlError::Environment("step before reset".into()))?;
        let t = cartpole_step(s, action)?;
        self.state = Some(t.next_state);
        Ok(StepOutcome {
            observation: AnsatzInput::Features(t.next_state.features(self.config.clip_velocities)),
            reward: t.reward,
            done: t.done,
        })
    }

    fn episode_metric(&self) -> Option<f64> {
        self.state.filter(|s| s.done).map(|s| s.steps as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_small_and_seeded() {
        let a = cartpole_reset(&mut RngStream::new(3, 0));
        let b = cartpole_reset(&mut RngStream::new(3, 0));
        assert_eq!(a, b);
        assert!(!a.done);
        for v in [a.x, a.x_dot, a.theta, a.theta_dot] {
            assert!(v.abs() <= 0.05);
        }
    }

    #[test]
    fn push_right_accelerates_right() {
        let s = CartPoleState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            done: false,
        };
        let t = cartpole_step(&s, 1).unwrap();
        assert!(t.next_state.x_dot > 0.0);
        assert!(cartpole_step(&s, 0).unwrap().next_state.x_dot < 0.0);
        assert!(cartpole_step(&s, 2).is_err());
    }

    #[test]
    fn upright_fixed_point_with_balanced_pushes() {
        // alternating pushes from rest keep the pole within bounds for the full cap
        let mut s = CartPoleState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            done: false,
        };
        let mut ret = 0.0;
        while !s.done {
            let a = if s.theta + 0.5 * s.theta_dot > 0.0 { 1 } else { 0 };
            let t = cartpole_step(&s, a).unwrap();
            ret += t.reward;
            s = t.next_state;
        }
        assert_eq!(s.steps, CARTPOLE_MAX_STEPS);
        assert_eq!(ret, 200.0);
        assert!(cartpole_step(&s, 0).is_err());
    }

    #[test]
    fn zero_force_upright_is_fixed_point() {
        let mut s = CartPoleState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            done: false,
        };
        for _ in 0..500 {
            s = integrate(&s, 0.0);
        }
        assert_eq!((s.x, s.x_dot, s.theta, s.theta_dot), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn tilt_terminates() {
        let s = CartPoleState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.2095,
            theta_dot: 1.0,
            steps: 0,
            done: false,
        };
        assert!(cartpole_step(&s, 0).unwrap().done);
    }
}
