//! The episodic environment wrapper: reset, step, observations, traces.

use std::f32::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::features::{feature_frame, FrameHistory};
use super::geometry::Footprint;
use super::reward::{reward_compute, RewardComponents};
use super::task::{GraspGenerator, TaskSpec};
use super::world::{GraspWorld, Motion, ObjectState, Pose};
use super::{EnvConfig, EpisodeOutcome};
use crate::seeds;
use crate::{Error, Result};

/// What the agent sees.
///
/// Flattened order: `features` (three stacked frames, `3 (5 + F)`),
/// `tactile` (`F`), `pose` (`x, y, z, θ`), `joints` (`F`), `estimate`
/// (`x, y`).
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub features: Vec<f32>,
    pub tactile: Vec<f32>,
    pub pose: [f32; 4],
    pub joints: Vec<f32>,
    pub estimate: [f32; 2],
}

impl Observation {
    pub fn dim(fingers: usize) -> usize {
        3 * super::frame_len(fingers) + fingers + 4 + fingers + 2
    }

    pub fn flatten(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(Self::dim(self.tactile.len()));
        v.extend_from_slice(&self.features);
        v.extend_from_slice(&self.tactile);
        v.extend_from_slice(&self.pose);
        v.extend_from_slice(&self.joints);
        v.extend_from_slice(&self.estimate);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: RewardComponents,
    pub outcome: EpisodeOutcome,
}

/// One row of an exported episode trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u32,
    pub pose: [f32; 4],
    pub joints: Vec<f32>,
    pub object: [f32; 2],
    pub lift: f32,
    pub contacts: usize,
    pub reward: f32,
    pub outcome: EpisodeOutcome,
}

#[derive(Clone, Debug)]
struct Episode {
    world: GraspWorld,
    task: TaskSpec,
    history: FrameHistory,
    estimate: [f32; 2],
    grasp_pose: Pose,
    noise_key: u64,
    potential: f32,
    outcome: EpisodeOutcome,
    trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct GraspEnv {
    cfg: EnvConfig,
    tracing: bool,
    episode: Option<Episode>,
}

fn clipped_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f32, limit: f32) -> f32 {
    let n = Normal::new(0.0f32, sigma).expect("positive sigma");
    n.sample(rng).clamp(-limit, limit)
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sigma: f32) -> f32 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0f32, sigma).expect("positive sigma").sample(rng)
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, half_width: f32) -> f32 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.gen_range(-half_width..=half_width)
    }
}

impl GraspEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(GraspEnv {
            cfg,
            tracing: false,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    /// Keep a per-step trace of the current episode for [`Self::write_trace`].
    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode
            .as_ref()
            .ok_or_else(|| Error::State("environment has not been reset".into()))
    }

    /// Privileged simulator state.
    pub fn world(&self) -> Result<&GraspWorld> {
        Ok(&self.episode()?.world)
    }

    pub fn task(&self) -> Result<&TaskSpec> {
        Ok(&self.episode()?.task)
    }

    /// Grasp pose proposed by the task's generator this episode.
    pub fn grasp_pose(&self) -> Result<Pose> {
        Ok(self.episode()?.grasp_pose)
    }

    pub fn outcome(&self) -> Result<EpisodeOutcome> {
        Ok(self.episode()?.outcome)
    }

    pub fn reset(&mut self, episode_seed: u64, task: &TaskSpec) -> Result<Observation> {
        task.validate()?;
        let cfg = &self.cfg;
        let mut rng = seeds::stream(episode_seed, &format!("reset/{}", task.pose_seed));
        let r = cfg.placement_radius * rng.gen::<f32>().sqrt();
        let phi = rng.gen_range(-PI..PI);
        let center = [r * phi.cos(), r * phi.sin()];
        let yaw = rng.gen_range(-PI..PI);
        let estimate = [
            center[0] + normal(&mut rng, cfg.estimate_noise),
            center[1] + normal(&mut rng, cfg.estimate_noise),
        ];
        let (sigma, limit, yaw_range, z_range) = match task.generator {
            GraspGenerator::Centroid => (0.15, 0.3, 0.3, (0.5, 0.5)),
            GraspGenerator::Perturbed => (0.35, 0.7, 0.6, (0.3, 0.7)),
        };
        let gx = estimate[0] + clipped_normal(&mut rng, sigma, limit);
        let gy = estimate[1] + clipped_normal(&mut rng, sigma, limit);
        let gtheta = rng.gen_range(-yaw_range..=yaw_range);
        let gz = task.height * rng.gen_range(z_range.0..=z_range.1);
        let grasp_pose = Pose {
            x: gx,
            y: gy,
            z: gz,
            theta: gtheta,
        };
        let pose = Pose {
            x: gx + jitter(&mut rng, cfg.pregrasp_noise),
            y: gy + jitter(&mut rng, cfg.pregrasp_noise),
            z: gz + cfg.pregrasp_distance + jitter(&mut rng, cfg.pregrasp_noise),
            theta: gtheta,
        };
        let object = ObjectState {
            footprint: Footprint {
                family: task.family,
                size: task.size,
                center,
                yaw,
            },
            height: task.height,
            heavy: task.is_heavy(),
            start: center,
            lift: 0.0,
        };
        let mut world = GraspWorld::new(pose, cfg.fingers, object, [estimate[0], estimate[1], gz]);
        world.refresh_contacts(cfg.reach_only);
        let noise_key = seeds::derive_seed(episode_seed, "features");
        let history = FrameHistory::primed(feature_frame(&world, cfg.feature_noise, noise_key));
        let lift_success = cfg.lift_success;
        let potential = reward_compute(&world, EpisodeOutcome::Running, 0.0, lift_success).potential;
        let mut ep = Episode {
            world,
            task: task.clone(),
            history,
            estimate,
            grasp_pose,
            noise_key,
            potential,
            outcome: EpisodeOutcome::Running,
            trace: Vec::new(),
        };
        if self.tracing {
            ep.trace.push(trace_row(&ep, 0.0));
        }
        self.episode = Some(ep);
        self.observation()
    }

    /// Observation of the current state.
    pub fn observation(&self) -> Result<Observation> {
        let ep = self.episode()?;
        let w = &ep.world;
        Ok(Observation {
            features: ep.history.stacked(),
            tactile: w.contacts().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
            pose: w.pose.to_array(),
            joints: w.joints.clone(),
            estimate: ep.estimate,
        })
    }

    pub fn step(&mut self, action: &[f32]) -> Result<StepResult> {
        let cfg = &self.cfg;
        let tracing = self.tracing;
        let ep = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::State("environment has not been reset".into()))?;
        if ep.outcome.is_finished() {
            return Err(Error::State(format!("episode already finished ({})", ep.outcome)));
        }
        if action.len() != cfg.action_dim() {
            return Err(Error::dim(format!(
                "action has {} values, expected {}",
                action.len(),
                cfg.action_dim()
            )));
        }
        if action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("action outside [-1, 1]".into()));
        }
        let motion = ep.world.advance(action, cfg);
        ep.world.step += 1;
        let w = &ep.world;
        let outcome = if motion == Motion::OutOfWorkspace {
            EpisodeOutcome::FailWorkspace
        } else if cfg.reach_only && w.distance_to_target() <= cfg.reach_tolerance {
            EpisodeOutcome::Success
        } else if w.object.displacement() > cfg.displacement_limit {
            EpisodeOutcome::FailDisplaced
        } else if w.is_carried() && w.object.lift >= cfg.lift_success {
            EpisodeOutcome::Success
        } else if w.step >= cfg.max_steps {
            EpisodeOutcome::Timeout
        } else {
            EpisodeOutcome::Running
        };
        let reward = reward_compute(w, outcome, ep.potential, cfg.lift_success);
        ep.potential = reward.potential;
        ep.outcome = outcome;
        ep.history.push(feature_frame(w, cfg.feature_noise, ep.noise_key));
        if tracing {
            let row = trace_row(ep, reward.total);
            ep.trace.push(row);
        }
        Ok(StepResult {
            obs: self.observation()?,
            reward,
            outcome,
        })
    }

    /// Writes the traced rows of the current episode as CSV.
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let ep = self.episode()?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "step", "x", "y", "z", "theta", "joints", "object_x", "object_y", "lift", "contacts", "reward",
            "outcome",
        ])?;
        for r in &ep.trace {
            let joints: Vec<String> = r.joints.iter().map(|q| q.to_string()).collect();
            w.write_record([
                r.step.to_string(),
                r.pose[0].to_string(),
                r.pose[1].to_string(),
                r.pose[2].to_string(),
                r.pose[3].to_string(),
                joints.join(";"),
                r.object[0].to_string(),
                r.object[1].to_string(),
                r.lift.to_string(),
                r.contacts.to_string(),
                r.reward.to_string(),
                r.outcome.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn trace(&self) -> Result<&[TraceRow]> {
        Ok(&self.episode()?.trace)
    }
}

fn trace_row(ep: &Episode, reward: f32) -> TraceRow {
    let w = &ep.world;
    TraceRow {
        step: w.step,
        pose: w.pose.to_array(),
        joints: w.joints.clone(),
        object: w.object.footprint.center,
        lift: w.object.lift,
        contacts: w.contact_count(),
        reward,
        outcome: ep.outcome,
    }
}
