//! Variational quantum reinforcement learning under shot, coherent and
//! incoherent noise.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod ansatz;
pub mod envs;
pub mod error;
pub mod gradients;
pub mod harness;
pub mod noise;
pub mod qsim;
pub mod rng;
pub mod shots;

pub use error::{QrlError, Result};
pub use rng::RngStream;
