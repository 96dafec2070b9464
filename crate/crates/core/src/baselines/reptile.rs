//! First-order meta-learning (Reptile) over SAC inner loops.

use super::{finetune_init, prefill_with_demonstrations};
use crate::env::{EnvConfig, GraspEnv, TaskDistribution};
use crate::nn::ParamSet;
use crate::residual::PretrainedPolicy;
use crate::sac::{AgentBundle, BundleSpec, EpisodeRecord, SacConfig, Trainer};
use crate::seeds;
use crate::{Error, Result};

/// `θ_meta ← θ_meta + eps (θ_task − θ_meta)` elementwise over each pair of
/// parameter sets, computed as `(1 − eps) θ_meta + eps θ_task` so that
/// `eps = 0` and `eps = 1` return either input exactly.
pub fn reptile_outer_update(meta: &[ParamSet], task: &[ParamSet], eps: f32) -> Result<Vec<ParamSet>> {
    if !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("reptile eps {eps} is not finite")));
    }
    if meta.len() != task.len() {
        return Err(Error::dim(format!(
            "{} meta parameter sets vs {} task parameter sets",
            meta.len(),
            task.len()
        )));
    }
    meta.iter()
        .zip(task)
        .map(|(m, t)| {
            let mut out = m.clone();
            out.zip_apply(t, |a, b| (1.0 - eps) * a + eps * b)?;
            Ok(out)
        })
        .collect()
}

/// Settings of one Reptile inner loop.
#[derive(Clone, Debug)]
pub struct InnerLoop {
    pub env: EnvConfig,
    pub sac: SacConfig,
    pub spec: BundleSpec,
    pub demo_episodes: usize,
    /// Environment steps per inner loop.
    pub steps: u64,
    pub buffer_capacity: usize,
}

/// Progress of one meta-iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaIteration {
    pub index: u64,
    pub task: String,
    pub inner_steps: u64,
    pub inner_updates: u64,
    /// Episodes finished during the inner loop, timesteps local to it.
    pub episodes: Vec<EpisodeRecord>,
}

/// Reptile over SAC: each meta-iteration samples a task, trains a copy of
/// the meta networks on it for `inner.steps` environment steps from a
/// demo-prefilled buffer, and moves the meta actor and critics a fraction
/// `eps` toward the result.
pub fn reptile_pretrain(
    mut meta: AgentBundle,
    tasks: &TaskDistribution,
    inner: &InnerLoop,
    eps: f32,
    meta_iterations: u64,
    seed: u64,
    mut on_iteration: impl FnMut(&MetaIteration, &AgentBundle) -> Result<()>,
) -> Result<AgentBundle> {
    let mut task_rng = seeds::stream(seed, "reptile-tasks");
    for index in 0..meta_iterations {
        let task = tasks.sample(&mut task_rng)?;
        let inner_seed = seeds::derive_seed(seed, &format!("reptile-inner/{index}"));
        let start = finetune_init(&PretrainedPolicy::from_bundle(&meta)?, &inner.spec);
        let env = GraspEnv::new(inner.env.clone())?;
        let fixed = TaskDistribution::Fixed(task.clone());
        let mut trainer = Trainer::new(start, env, fixed.clone(), inner.sac.clone(), inner.buffer_capacity, inner_seed)?;
        prefill_with_demonstrations(&mut trainer, &fixed, inner.demo_episodes, inner_seed)?;
        let mut episodes = Vec::new();
        while trainer.timestep() < inner.steps {
            episodes.extend(trainer.train_iteration()?.episodes);
        }
        let inner_steps = trainer.timestep();
        let adapted = trainer.into_learner();
        let updated = reptile_outer_update(
            &[meta.actor.clone(), meta.critic1.clone(), meta.critic2.clone()],
            &[adapted.actor.clone(), adapted.critic1.clone(), adapted.critic2.clone()],
            eps,
        )?;
        let [actor, critic1, critic2]: [ParamSet; 3] = updated.try_into().expect("three parameter sets");
        meta = AgentBundle::from_parts(&inner.spec, actor, critic1, critic2, meta.log_alpha);
        let info = MetaIteration {
            index,
            task: task.name.clone(),
            inner_steps,
            inner_updates: adapted.update_count(),
            episodes,
        };
        on_iteration(&info, &meta)?;
    }
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpArch;

    #[test]
    fn mismatched_shapes_fail() {
        let a = ParamSet::zeros(MlpArch::new(2, 3, 1));
        let b = ParamSet::zeros(MlpArch::new(2, 4, 1));
        assert!(reptile_outer_update(&[a.clone()], &[b], 0.5).is_err());
        assert!(reptile_outer_update(&[a.clone()], &[], 0.5).is_err());
    }
}
