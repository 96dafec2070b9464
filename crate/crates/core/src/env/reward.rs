//! Reward components and the per-step shaped reward.

use super::world::GraspWorld;
use super::EpisodeOutcome;

pub const W_DIST: f32 = 0.1;
pub const W_CONTACT: f32 = 0.3;
pub const W_HEIGHT: f32 = 0.6;
pub const SUCCESS_BONUS: f32 = 10.0;
pub const FAILURE_PENALTY: f32 = -1.0;

/// Reward component levels for the current world, the shaping potential
/// they define, and the reward actually paid for the last step.
///
/// The step reward pays the *change* of the potential plus the terminal
/// bonus: `total = potential - previous_potential + r_terminal`. Paying the
/// levels directly would make hovering just short of success worth more
/// than succeeding under a 0.99 discount.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardComponents {
    pub r_dist: f32,
    pub r_contact: f32,
    pub r_height: f32,
    pub r_terminal: f32,
    /// `0.1 r_dist + 0.3 r_contact + 0.6 r_height`.
    pub potential: f32,
    pub total: f32,
}

pub fn terminal_reward(outcome: EpisodeOutcome) -> f32 {
    match outcome {
        EpisodeOutcome::Success => SUCCESS_BONUS,
        EpisodeOutcome::FailDisplaced | EpisodeOutcome::FailWorkspace => FAILURE_PENALTY,
        EpisodeOutcome::Running | EpisodeOutcome::Timeout => 0.0,
    }
}

pub fn reward_compute(
    world: &GraspWorld,
    outcome: EpisodeOutcome,
    previous_potential: f32,
    lift_success: f32,
) -> RewardComponents {
    let d = world.distance_to_target();
    let r_dist = if world.d0 > 0.0 {
        1.0 - (d / world.d0).min(1.0)
    } else {
        1.0
    };
    let r_contact = world.contact_count() as f32 / world.fingers() as f32;
    let r_height = (world.object.lift / lift_success).min(1.0);
    let r_terminal = terminal_reward(outcome);
    let potential = W_DIST * r_dist + W_CONTACT * r_contact + W_HEIGHT * r_height;
    RewardComponents {
        r_dist,
        r_contact,
        r_height,
        r_terminal,
        potential,
        total: potential - previous_potential + r_terminal,
    }
}
