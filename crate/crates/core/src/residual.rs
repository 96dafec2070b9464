//! Residual learning on top of a frozen pretrained actor-critic.
//!
//! The residual actor sees `[s ‖ a_pre]`, where `a_pre` is the frozen base
//! actor's deterministic action, and the executed action is
//! `clip(a_pre + scale · a_rl, -1, 1)`. Critics score `(s, a_total)`, the
//! same signature as the base critics, so they can start from the base
//! critic weights.

use rand::Rng;

use crate::nn::{AdamConfig, HeadInit, MlpArch, ParamSet};
use crate::sac::{deterministic_action, AgentBundle, BundleSpec, Composition, Learner};
use crate::{Error, Result};

/// The frozen networks of a pretrained agent.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedPolicy {
    actor: ParamSet,
    critic1: ParamSet,
    critic2: ParamSet,
}

impl PretrainedPolicy {
    pub fn new(actor: ParamSet, critic1: ParamSet, critic2: ParamSet) -> Result<Self> {
        let a = actor.arch();
        if a.output % 2 != 0 {
            return Err(Error::IncompatibleCheckpoint(format!(
                "actor head width {} is not 2 x action_dim",
                a.output
            )));
        }
        let expected = MlpArch::new(a.input + a.output / 2, critic1.arch().hidden, 1);
        for c in [&critic1, &critic2] {
            if c.arch() != expected {
                return Err(Error::IncompatibleCheckpoint(format!(
                    "critic {} does not score (obs {}, action {})",
                    c.arch_tag(),
                    a.input,
                    a.output / 2
                )));
            }
        }
        Ok(PretrainedPolicy {
            actor,
            critic1,
            critic2,
        })
    }

    pub fn from_bundle(b: &AgentBundle) -> Result<Self> {
        Self::new(b.actor.clone(), b.critic1.clone(), b.critic2.clone())
    }

    pub fn actor(&self) -> &ParamSet {
        &self.actor
    }

    pub fn critic1(&self) -> &ParamSet {
        &self.critic1
    }

    pub fn critic2(&self) -> &ParamSet {
        &self.critic2
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.arch().input
    }

    pub fn action_dim(&self) -> usize {
        self.actor.arch().output / 2
    }

    pub fn hidden(&self) -> usize {
        self.critic1.arch().hidden
    }
}

/// `[s ‖ a_pre]`.
pub fn residual_actor_input(s: &[f32], a_pre: &[f32]) -> Result<Vec<f32>> {
    if a_pre.is_empty() {
        return Err(Error::dim("empty base action"));
    }
    Ok([s, a_pre].concat())
}

/// Deterministic `tanh(mean)` of the frozen base actor.
pub fn base_action(base: &PretrainedPolicy, s: &[f32]) -> Result<Vec<f32>> {
    if s.len() != base.obs_dim() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "observation has {} values, base actor expects {}",
            s.len(),
            base.obs_dim()
        )));
    }
    deterministic_action(&base.actor, s)
}

/// `clip(a_pre + scale · a_rl, -1, 1)`.
pub fn compose_action(a_pre: &[f32], a_rl: &[f32], scale: f32) -> Result<Vec<f32>> {
    if a_pre.len() != a_rl.len() {
        return Err(Error::dim(format!(
            "base action has {} values, residual {}",
            a_pre.len(),
            a_rl.len()
        )));
    }
    Ok(Composition::Residual { scale }.compose(a_pre, a_rl).0)
}

#[derive(Clone, Debug)]
pub struct ResidualAgent {
    pub inner: AgentBundle,
    base: PretrainedPolicy,
    scale: f32,
}

/// Construction options for [`ResidualAgent::new`].
#[derive(Clone, Copy, Debug)]
pub struct ResidualSpec {
    pub residual_scale: f32,
    /// Copy the base critics into the residual agent (RESPRECT); without it
    /// the critics start fresh (plain residual).
    pub warm_start: bool,
    pub init_alpha: f32,
    pub target_entropy: f32,
    pub adam: AdamConfig,
}

impl ResidualAgent {
    /// Residual agent with a zero-initialized actor head, so the initial
    /// deterministic residual is exactly zero.
    pub fn new<R: Rng + ?Sized>(base: PretrainedPolicy, spec: &ResidualSpec, rng: &mut R) -> Result<Self> {
        if !(spec.residual_scale > 0.0 && spec.residual_scale <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "residual_scale {} outside (0, 1]",
                spec.residual_scale
            )));
        }
        let bundle_spec = BundleSpec {
            obs_dim: base.obs_dim(),
            action_dim: base.action_dim(),
            hidden: base.hidden(),
            residual_actor: true,
            actor_head: HeadInit::Zero,
            init_alpha: spec.init_alpha,
            target_entropy: spec.target_entropy,
            adam: spec.adam,
        };
        let mut agent = ResidualAgent {
            inner: AgentBundle::new(&bundle_spec, rng),
            base,
            scale: spec.residual_scale,
        };
        if spec.warm_start {
            let base = agent.base.clone();
            warm_start_critics(&base, &mut agent)?;
        }
        Ok(agent)
    }

    /// Reassembles a stored agent; the inner critics must score the base's
    /// `(obs, action)` signature.
    pub fn assemble(inner: AgentBundle, base: PretrainedPolicy, residual_scale: f32) -> Result<Self> {
        if inner.obs_dim() != base.obs_dim()
            || inner.action_dim() != base.action_dim()
            || inner.critic1.arch() != base.critic1().arch()
            || inner.actor.arch().input != base.obs_dim() + base.action_dim()
        {
            return Err(Error::IncompatibleCheckpoint(
                "residual networks do not match the base policy".into(),
            ));
        }
        Ok(ResidualAgent {
            inner,
            base,
            scale: residual_scale,
        })
    }

    pub fn base(&self) -> &PretrainedPolicy {
        &self.base
    }

    pub fn residual_scale(&self) -> f32 {
        self.scale
    }
}

/// Copies the base critics into the residual critics and targets and zeroes
/// all optimizer moments.
pub fn warm_start_critics(base: &PretrainedPolicy, agent: &mut ResidualAgent) -> Result<()> {
    for (b, r) in [(&base.critic1, &agent.inner.critic1), (&base.critic2, &agent.inner.critic2)] {
        if b.arch_tag() != r.arch_tag() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "base critic {} vs residual critic {}",
                b.arch_tag(),
                r.arch_tag()
            )));
        }
    }
    let inner = &mut agent.inner;
    inner.critic1 = base.critic1.clone();
    inner.critic2 = base.critic2.clone();
    inner.target1 = base.critic1.clone();
    inner.target2 = base.critic2.clone();
    inner.reset_optimizers();
    Ok(())
}

impl Learner for ResidualAgent {
    fn bundle(&self) -> &AgentBundle {
        &self.inner
    }

    fn bundle_mut(&mut self) -> &mut AgentBundle {
        &mut self.inner
    }

    fn composition(&self) -> Composition<f32> {
        Composition::Residual { scale: self.scale }
    }

    fn base_action(&self, obs: &[f32]) -> Result<Vec<f32>> {
        base_action(&self.base, obs)
    }
}
