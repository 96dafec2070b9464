use rand::Rng;
use rand_distr::StandardNormal;

use super::losses::{actor_loss, alpha_loss_grad, critic_loss_grad, critic_targets, Composition};
use super::replay::Batch;
use super::SacConfig;
use crate::nn::{AdamConfig, AdamState, HeadInit, MlpArch, ParamSet};
use crate::{Error, Result};

/// Shapes and initial values for a new [`AgentBundle`].
#[derive(Clone, Copy, Debug)]
pub struct BundleSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    /// Actor sees `[s ‖ a_pre]` instead of `s`.
    pub residual_actor: bool,
    pub actor_head: HeadInit,
    pub init_alpha: f32,
    pub target_entropy: f32,
    pub adam: AdamConfig,
}

impl BundleSpec {
    pub fn actor_arch(&self) -> MlpArch {
        let input = if self.residual_actor {
            self.obs_dim + self.action_dim
        } else {
            self.obs_dim
        };
        MlpArch::new(input, self.hidden, 2 * self.action_dim)
    }

    pub fn critic_arch(&self) -> MlpArch {
        MlpArch::new(self.obs_dim + self.action_dim, self.hidden, 1)
    }
}

/// Actor, twin critics with their targets, the entropy coefficient and all
/// optimizer state.
#[derive(Clone, Debug)]
pub struct AgentBundle {
    pub actor: ParamSet,
    pub critic1: ParamSet,
    pub critic2: ParamSet,
    pub target1: ParamSet,
    pub target2: ParamSet,
    pub log_alpha: f32,
    pub target_entropy: f32,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub alpha_opt: AdamState,
    obs_dim: usize,
    action_dim: usize,
    updates: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateMetrics {
    pub critic1_loss: f32,
    pub critic2_loss: f32,
    pub actor_loss: f32,
    pub alpha: f32,
    /// `-mean(log π)` over the actor batch.
    pub entropy: f32,
}

#[derive(Clone, Debug)]
pub struct ActorUpdate {
    pub loss: f32,
    pub mean_entropy: f32,
    pub log_probs: Vec<f32>,
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

/// `target ← (1 - τ) target + τ online`.
pub fn soft_update(online: &ParamSet, target: &mut ParamSet, tau: f32) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside (0, 1]")));
    }
    if tau == 1.0 {
        online.ensure_same_arch(target)?;
        *target = online.clone();
        return Ok(());
    }
    target.zip_apply(online, |t, o| (1.0 - tau) * t + tau * o)
}

impl AgentBundle {
    pub fn new<R: Rng + ?Sized>(spec: &BundleSpec, rng: &mut R) -> Self {
        let actor = ParamSet::init(spec.actor_arch(), spec.actor_head, rng);
        let critic1 = ParamSet::init(spec.critic_arch(), HeadInit::FanIn, rng);
        let critic2 = ParamSet::init(spec.critic_arch(), HeadInit::FanIn, rng);
        Self::from_parts(spec, actor, critic1, critic2, spec.init_alpha.ln())
    }

    /// Assembles a bundle around existing networks; targets are exact
    /// copies of the critics and all optimizer moments start at zero.
    pub fn from_parts(
        spec: &BundleSpec,
        actor: ParamSet,
        critic1: ParamSet,
        critic2: ParamSet,
        log_alpha: f32,
    ) -> Self {
        let adam = spec.adam;
        AgentBundle {
            actor_opt: AdamState::for_params(&actor, adam),
            critic1_opt: AdamState::for_params(&critic1, adam),
            critic2_opt: AdamState::for_params(&critic2, adam),
            alpha_opt: AdamState::for_blocks(&[1], adam),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha,
            target_entropy: spec.target_entropy,
            obs_dim: spec.obs_dim,
            action_dim: spec.action_dim,
            updates: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn alpha(&self) -> f32 {
        self.log_alpha.exp()
    }

    /// Number of completed gradient rounds.
    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Zeroes every optimizer's moments and step counter.
    pub fn reset_optimizers(&mut self) {
        for o in [
            &mut self.actor_opt,
            &mut self.critic1_opt,
            &mut self.critic2_opt,
            &mut self.alpha_opt,
        ] {
            o.reset();
        }
        self.updates = 0;
    }

    pub fn critic_update_with_noise(
        &mut self,
        batch: &Batch,
        gamma: f32,
        comp: Composition<f32>,
        next_noise: &[f32],
    ) -> Result<(f32, f32)> {
        let y = critic_targets(
            &self.actor,
            &self.target1,
            &self.target2,
            self.alpha(),
            gamma,
            batch,
            next_noise,
            comp,
        )?;
        let (l1, g1) = critic_loss_grad(&self.critic1, batch, &y)?;
        let (l2, g2) = critic_loss_grad(&self.critic2, batch, &y)?;
        self.critic1_opt.step(&mut self.critic1, &g1)?;
        self.critic2_opt.step(&mut self.critic2, &g2)?;
        Ok((l1, l2))
    }

    /// One Adam step on each critic against soft Bellman targets.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        gamma: f32,
        comp: Composition<f32>,
        rng: &mut R,
    ) -> Result<(f32, f32)> {
        let noise = standard_normal(rng, batch.rows * batch.action_dim);
        self.critic_update_with_noise(batch, gamma, comp, &noise)
    }

    pub fn actor_update_with_noise(
        &mut self,
        batch: &Batch,
        comp: Composition<f32>,
        noise: &[f32],
    ) -> Result<ActorUpdate> {
        let out = actor_loss(
            &self.actor,
            &self.critic1,
            &self.critic2,
            self.alpha(),
            batch,
            noise,
            comp,
            true,
        )?;
        let grads = out.grads.expect("requested gradients");
        self.actor_opt.step(&mut self.actor, &grads)?;
        let n = out.log_probs.len() as f32;
        let mean_entropy = -out.log_probs.iter().sum::<f32>() / n;
        Ok(ActorUpdate {
            loss: out.loss,
            mean_entropy,
            log_probs: out.log_probs,
        })
    }

    /// One Adam step on the actor only.
    pub fn actor_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        comp: Composition<f32>,
        rng: &mut R,
    ) -> Result<ActorUpdate> {
        let noise = standard_normal(rng, batch.rows * batch.action_dim);
        self.actor_update_with_noise(batch, comp, &noise)
    }

    /// One Adam step on `log_alpha`.
    pub fn alpha_update(&mut self, log_probs: &[f32]) -> Result<()> {
        let (_, g) = alpha_loss_grad(self.log_alpha, log_probs, self.target_entropy);
        let mut la = [self.log_alpha];
        self.alpha_opt.step_blocks([&mut la[..]], [&[g][..]])?;
        if !la[0].is_finite() {
            return Err(Error::Numeric("log_alpha".into()));
        }
        self.log_alpha = la[0];
        Ok(())
    }

    pub fn soft_update_targets(&mut self, tau: f32) -> Result<()> {
        soft_update(&self.critic1, &mut self.target1, tau)?;
        soft_update(&self.critic2, &mut self.target2, tau)
    }

    /// Critic step, actor step, entropy-coefficient step, and (every
    /// `target_update_interval` rounds) the Polyak target update.
    pub fn gradient_round<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        cfg: &SacConfig,
        comp: Composition<f32>,
        rng: &mut R,
    ) -> Result<UpdateMetrics> {
        let (c1, c2) = self.critic_update(batch, cfg.gamma, comp, rng)?;
        let act = self.actor_update(batch, comp, rng)?;
        if !cfg.fixed_alpha {
            self.alpha_update(&act.log_probs)?;
        }
        self.updates += 1;
        if self.updates % cfg.target_update_interval == 0 {
            self.soft_update_targets(cfg.tau)?;
        }
        Ok(UpdateMetrics {
            critic1_loss: c1,
            critic2_loss: c2,
            actor_loss: act.loss,
            alpha: self.alpha(),
            entropy: act.mean_entropy,
        })
    }
}
