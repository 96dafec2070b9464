//! Scripted grasping controller with privileged access to the simulator.

use crate::env::{EnvConfig, EpisodeOutcome, GraspEnv, GraspWorld, Pose, TaskDistribution};
use crate::sac::Transition;
use crate::seeds;
use crate::Result;

use rand::Rng;

/// Lateral and vertical tolerance for switching from approach to closing.
const ALIGN_TOL: f32 = 0.1;

fn toward(error: f32, cap: f32) -> f32 {
    (error / cap).clamp(-1.0, 1.0)
}

/// Moves to the generated grasp pose (first laterally, then down along the
/// approach axis), closes every finger until the object is held by enough
/// of them, then lifts.
pub fn scripted_demo_policy(world: &GraspWorld, grasp: Pose, cfg: &EnvConfig) -> Vec<f32> {
    let p = world.pose;
    let ex = grasp.x - p.x;
    let ey = grasp.y - p.y;
    let lateral = ex.hypot(ey);
    let aligned = lateral < ALIGN_TOL && (grasp.z - p.z).abs() < ALIGN_TOL;
    let closing = world.is_grasped() || aligned || world.joints.iter().any(|&q| q > 0.0);
    let mut a = vec![0.0; cfg.action_dim()];
    a[3] = toward(grasp.theta - p.theta, cfg.max_rotation);
    if closing {
        for q in &mut a[4..] {
            *q = 1.0;
        }
        if world.is_carried() {
            a[2] = 1.0;
        }
    } else {
        a[0] = toward(ex, cfg.max_translation);
        a[1] = toward(ey, cfg.max_translation);
        if lateral < ALIGN_TOL {
            a[2] = toward(grasp.z - p.z, cfg.max_translation);
        }
    }
    a
}

/// Runs the scripted controller for `episodes` episodes and returns every
/// transition plus the episode outcomes. Episode seeds and tasks come from
/// the stream `demos` of `seed`.
pub fn collect_demonstrations(
    env: &mut GraspEnv,
    tasks: &TaskDistribution,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<Transition>, Vec<EpisodeOutcome>)> {
    let mut rng = seeds::stream(seed, "demos");
    let d = env.action_dim();
    let mut transitions = Vec::new();
    let mut outcomes = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let episode_seed: u64 = rng.gen();
        let task = tasks.sample(&mut rng)?;
        let mut obs = env.reset(episode_seed, &task)?.flatten();
        loop {
            let action = scripted_demo_policy(env.world()?, env.grasp_pose()?, env.config());
            let step = env.step(&action)?;
            let next = step.obs.flatten();
            transitions.push(Transition {
                obs,
                action,
                reward: step.reward.total,
                next_obs: next.clone(),
                a_pre: vec![0.0; d],
                a_pre_next: vec![0.0; d],
                done: step.outcome.is_terminal(),
                truncated: step.outcome == EpisodeOutcome::Timeout,
            });
            if step.outcome.is_finished() {
                outcomes.push(step.outcome);
                break;
            }
            obs = next;
        }
    }
    Ok((transitions, outcomes))
}
