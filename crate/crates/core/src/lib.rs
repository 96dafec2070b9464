//! Residual reinforcement learning on top of a pretrained soft actor-critic
//! policy, with critic warm-start, a baseline suite, and a deterministic toy
//! multi-fingered grasping environment.
//!
//! Module map:
//! - [`nn`]: dense tensors, two-hidden-layer MLPs with hand-written backprop, Adam.
//! - [`sac`]: squashed-Gaussian actor, twin critics, entropy tuning, replay.
//! - [`residual`]: residual action composition and critic warm-start.
//! - [`env`]: the grasping MDP and its feature stacker.
//! - [`baselines`]: scripted demonstrations, demo-bootstrapped pretraining,
//!   fine-tuning, Reptile, pretrained evaluation.
//! - [`harness`]: configuration, checkpoints, run logs, experiment drivers.

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod residual;
pub mod sac;
pub mod seeds;

pub use error::{Error, Result};
