//! Fine-tuning a pretrained agent and evaluating frozen policies.

use crate::env::{EnvConfig, EpisodeOutcome, GraspEnv, TaskDistribution};
use crate::residual::PretrainedPolicy;
use crate::sac::{evaluate_policy, AgentBundle, BundleSpec, Learner, Trainer};
use crate::seeds;
use crate::{Error, Result};

use super::collect_demonstrations;

/// A trainable bundle whose actor and critics (and targets) start as copies
/// of the base networks, with fresh optimizers and the spec's initial α.
pub fn finetune_init(base: &PretrainedPolicy, spec: &BundleSpec) -> AgentBundle {
    AgentBundle::from_parts(
        spec,
        base.actor().clone(),
        base.critic1().clone(),
        base.critic2().clone(),
        spec.init_alpha.ln(),
    )
}

/// Pushes `episodes` scripted-demo episodes into the trainer's buffer;
/// returns the number of transitions added.
pub fn prefill_with_demonstrations<L: Learner>(
    trainer: &mut Trainer<L>,
    tasks: &TaskDistribution,
    episodes: usize,
    seed: u64,
) -> Result<usize> {
    if episodes == 0 {
        return Ok(0);
    }
    let mut env = GraspEnv::new(trainer.env().config().clone())?;
    let (transitions, _) = collect_demonstrations(&mut env, tasks, episodes, seed)?;
    let n = transitions.len();
    for t in transitions {
        trainer.buffer.push(t);
    }
    Ok(n)
}

/// Episode seeds used by every evaluation of `n` episodes under `seed`.
pub fn evaluation_seeds(seed: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| seeds::derive_seed(seed, &format!("eval/{i}"))).collect()
}

/// Success rate of deterministic rollouts over `n` seeded episodes, with
/// the per-episode outcomes.
pub fn evaluate_pretrained<L: Learner + ?Sized>(
    policy: &L,
    env: &EnvConfig,
    tasks: &TaskDistribution,
    n: usize,
    seed: u64,
) -> Result<(f32, Vec<EpisodeOutcome>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut env = GraspEnv::new(env.clone())?;
    let outcomes = evaluate_policy(policy, &mut env, tasks, &evaluation_seeds(seed, n))?;
    Ok((success_rate(&outcomes), outcomes))
}

pub fn success_rate(outcomes: &[EpisodeOutcome]) -> f32 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|&&o| o == EpisodeOutcome::Success).count() as f32 / outcomes.len() as f32
}
