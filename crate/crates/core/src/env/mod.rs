//! A deterministic toy multi-fingered grasping task.
//!
//! A palm at `(x, y)` with approach height `z` and yaw `θ` carries `F`
//! fingers spread evenly around it; each finger's joint `q ∈ [0, 1]` moves
//! its tip from an open radius inward. Fingertips push a free object,
//! two opposing contacts close a grasp, and raising the palm lifts the
//! object if enough fingers hold it. An episode starts at a pre-grasp pose
//! a fixed distance above a generated grasp pose.

mod features;
mod geometry;
mod grasp;
mod reward;
mod task;
mod world;

pub use features::{feature_frame, flare_stack, frame_len, geometric_frame, FrameHistory};
pub use geometry::{Footprint, ShapeFamily};
pub use grasp::{GraspEnv, Observation, StepResult, TraceRow};
pub use reward::{
    reward_compute, terminal_reward, RewardComponents, FAILURE_PENALTY, SUCCESS_BONUS, W_CONTACT, W_DIST,
    W_HEIGHT,
};
pub use task::{
    object_sampler, GraspGenerator, TaskDistribution, TaskSpec, HEAVY_MASS, HELDOUT, PRETRAIN_HEIGHT,
    PRETRAIN_MASS, PRETRAIN_SIZE,
};
pub use world::{
    GraspWorld, Motion, ObjectState, Phase, Pose, Workspace, CLOSED_RADIUS, CONTACT_TOL, OPEN_RADIUS, TIP_RADIUS,
};

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EpisodeOutcome {
    Running,
    Success,
    FailDisplaced,
    FailWorkspace,
    Timeout,
}

impl EpisodeOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeOutcome::Running => "running",
            EpisodeOutcome::Success => "success",
            EpisodeOutcome::FailDisplaced => "fail_displaced",
            EpisodeOutcome::FailWorkspace => "fail_workspace",
            EpisodeOutcome::Timeout => "timeout",
        }
    }

    pub fn is_finished(self) -> bool {
        self != EpisodeOutcome::Running
    }

    /// Finished in a genuine terminal state (no bootstrapping).
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            EpisodeOutcome::Success | EpisodeOutcome::FailDisplaced | EpisodeOutcome::FailWorkspace
        )
    }
}

impl fmt::Display for EpisodeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpisodeOutcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            EpisodeOutcome::Running,
            EpisodeOutcome::Success,
            EpisodeOutcome::FailDisplaced,
            EpisodeOutcome::FailWorkspace,
            EpisodeOutcome::Timeout,
        ]
        .into_iter()
        .find(|o| o.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown outcome {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub fingers: usize,
    pub max_steps: u32,
    /// Per-step offset caps for translation, yaw and joints.
    pub max_translation: f32,
    pub max_rotation: f32,
    pub max_joint: f32,
    /// Horizontal object displacement that fails the episode.
    pub displacement_limit: f32,
    pub lift_success: f32,
    /// Height of the pre-grasp pose above the grasp pose.
    pub pregrasp_distance: f32,
    /// Half-width of the uniform jitter added to the pre-grasp position.
    pub pregrasp_noise: f32,
    pub feature_noise: f32,
    pub estimate_noise: f32,
    /// Objects are placed uniformly in a disc of this radius.
    pub placement_radius: f32,
    /// Point-mass variant: no contacts or lifting, success on reaching the
    /// grasp target.
    pub reach_only: bool,
    pub reach_tolerance: f32,
    pub workspace: Workspace,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            fingers: 3,
            max_steps: 100,
            max_translation: 0.2,
            max_rotation: 0.1,
            max_joint: 0.1,
            displacement_limit: 3.0,
            lift_success: 10.0,
            pregrasp_distance: 5.0,
            pregrasp_noise: 0.1,
            feature_noise: 0.01,
            estimate_noise: 0.05,
            placement_radius: 2.0,
            reach_only: false,
            reach_tolerance: 0.5,
            workspace: Workspace::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.fingers < 2 {
            return bad("fingers must be at least 2");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        for (name, v) in [
            ("max_translation", self.max_translation),
            ("max_rotation", self.max_rotation),
            ("max_joint", self.max_joint),
            ("displacement_limit", self.displacement_limit),
            ("lift_success", self.lift_success),
            ("pregrasp_distance", self.pregrasp_distance),
            ("reach_tolerance", self.reach_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("pregrasp_noise", self.pregrasp_noise),
            ("feature_noise", self.feature_noise),
            ("estimate_noise", self.estimate_noise),
            ("placement_radius", self.placement_radius),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        Ok(())
    }

    /// Action length: four pose offsets plus one per finger.
    pub fn action_dim(&self) -> usize {
        4 + self.fingers
    }

    /// Flattened observation length.
    pub fn obs_dim(&self) -> usize {
        Observation::dim(self.fingers)
    }
}
