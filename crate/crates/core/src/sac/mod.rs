//! Soft actor-critic: squashed-Gaussian actor, twin critics with Polyak
//! targets, automatic entropy tuning, uniform replay, and the
//! collect-then-update training schedule.

mod agent;
pub mod losses;
mod policy;
mod replay;
mod trainer;

pub use agent::{soft_update, standard_normal, ActorUpdate, AgentBundle, BundleSpec, UpdateMetrics};
pub use losses::{actor_loss, alpha_loss_grad, critic_loss, critic_loss_grad, critic_targets, ActorLoss, Composition};
pub use policy::{
    deterministic_action, sample_action, squash_batch, squashed_gaussian_sample, SquashedBatch, LOG_STD_MAX,
    LOG_STD_MIN, SQUASH_EPS,
};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use trainer::{evaluate_policy, EpisodeRecord, IterationReport, Learner, Trainer};

use crate::{Error, Result};

/// Update schedule and Bellman constants.
#[derive(Clone, Debug, PartialEq)]
pub struct SacConfig {
    pub gamma: f32,
    pub tau: f32,
    pub batch_size: usize,
    /// Update rounds after each collection phase.
    pub gradient_steps: usize,
    /// Environment steps per collection phase.
    pub train_freq: usize,
    /// Steps of uniform-random actions before the first update.
    pub learning_starts: u64,
    pub target_update_interval: u64,
    /// Keep α at its initial value instead of tuning it.
    pub fixed_alpha: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            gradient_steps: 10,
            train_freq: 10,
            learning_starts: 1000,
            target_update_interval: 1,
            fixed_alpha: false,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if self.batch_size == 0 || self.train_freq == 0 || self.target_update_interval == 0 {
            return Err(Error::Config(
                "batch_size, train_freq and target_update_interval must be positive".into(),
            ));
        }
        Ok(())
    }
}
