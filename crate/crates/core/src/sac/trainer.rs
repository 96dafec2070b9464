//! The off-policy collect/update loop shared by every training mode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::agent::{standard_normal, AgentBundle, UpdateMetrics};
use super::losses::Composition;
use super::policy::{deterministic_action, sample_action};
use super::replay::{ReplayBuffer, Transition};
use super::SacConfig;
use crate::env::{EpisodeOutcome, GraspEnv, TaskDistribution};
use crate::seeds;
use crate::Result;

/// An agent that the trainer can act with and update.
pub trait Learner {
    fn bundle(&self) -> &AgentBundle;
    fn bundle_mut(&mut self) -> &mut AgentBundle;
    fn composition(&self) -> Composition<f32>;
    /// Frozen base action at `obs`; zeros for non-residual agents.
    fn base_action(&self, obs: &[f32]) -> Result<Vec<f32>>;

    /// Input the actor sees for `obs` given the base action.
    fn actor_input(&self, obs: &[f32], a_pre: &[f32]) -> Vec<f32> {
        match self.composition() {
            Composition::Plain => obs.to_vec(),
            Composition::Residual { .. } => [obs, a_pre].concat(),
        }
    }

    /// Executed action for a policy output.
    fn execute(&self, a_pre: &[f32], a_policy: &[f32]) -> Vec<f32> {
        self.composition().compose(a_pre, a_policy).0
    }

    /// Stochastic action to execute, sampled with `noise`.
    fn explore_action(&self, obs: &[f32], a_pre: &[f32], noise: &[f32]) -> Result<Vec<f32>> {
        let (a, _) = sample_action(&self.bundle().actor, &self.actor_input(obs, a_pre), noise)?;
        Ok(self.execute(a_pre, &a))
    }

    /// Deterministic action to execute.
    fn greedy_action(&self, obs: &[f32], a_pre: &[f32]) -> Result<Vec<f32>> {
        let a = deterministic_action(&self.bundle().actor, &self.actor_input(obs, a_pre))?;
        Ok(self.execute(a_pre, &a))
    }
}

impl Learner for AgentBundle {
    fn bundle(&self) -> &AgentBundle {
        self
    }

    fn bundle_mut(&mut self) -> &mut AgentBundle {
        self
    }

    fn composition(&self) -> Composition<f32> {
        Composition::Plain
    }

    fn base_action(&self, _obs: &[f32]) -> Result<Vec<f32>> {
        Ok(vec![0.0; self.action_dim()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// Total environment steps taken when the episode ended.
    pub timestep: u64,
    pub index: u64,
    pub outcome: EpisodeOutcome,
    pub ret: f32,
    pub length: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationReport {
    pub steps: usize,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateMetrics>,
}

#[derive(Clone, Debug)]
struct Current {
    obs: Vec<f32>,
    a_pre: Vec<f32>,
    ret: f32,
    len: u32,
}

/// Owns the learner, its replay buffer and the environment, and alternates
/// collection and update phases.
pub struct Trainer<L: Learner> {
    pub learner: L,
    pub buffer: ReplayBuffer,
    env: GraspEnv,
    tasks: TaskDistribution,
    cfg: SacConfig,
    episode_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    current: Option<Current>,
    timestep: u64,
    episodes: u64,
}

impl<L: Learner> Trainer<L> {
    pub fn new(
        learner: L,
        env: GraspEnv,
        tasks: TaskDistribution,
        cfg: SacConfig,
        buffer_capacity: usize,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            learner,
            buffer: ReplayBuffer::new(buffer_capacity)?,
            env,
            tasks,
            cfg,
            episode_rng: seeds::stream(seed, "episodes"),
            action_rng: seeds::stream(seed, "actions"),
            replay_rng: seeds::stream(seed, "replay"),
            update_rng: seeds::stream(seed, "updates"),
            current: None,
            timestep: 0,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: SacConfig) -> Result<()> {
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn env(&self) -> &GraspEnv {
        &self.env
    }

    pub fn into_learner(self) -> L {
        self.learner
    }

    fn start_episode(&mut self) -> Result<()> {
        let seed: u64 = self.episode_rng.gen();
        let task = self.tasks.sample(&mut self.episode_rng)?;
        let obs = self.env.reset(seed, &task)?.flatten();
        let a_pre = self.learner.base_action(&obs)?;
        self.current = Some(Current {
            obs,
            a_pre,
            ret: 0.0,
            len: 0,
        });
        Ok(())
    }

    /// Takes one environment step and stores the transition; returns the
    /// episode record if the step ended an episode.
    pub fn collect_step(&mut self) -> Result<Option<EpisodeRecord>> {
        if self.current.is_none() {
            self.start_episode()?;
        }
        let cur = self.current.as_ref().expect("episode started");
        let d = self.env.action_dim();
        let action = if self.timestep < self.cfg.learning_starts {
            let u: Vec<f32> = (0..d).map(|_| self.action_rng.gen_range(-1.0..=1.0)).collect();
            self.learner.execute(&cur.a_pre, &u)
        } else {
            let noise = standard_normal(&mut self.action_rng, d);
            self.learner.explore_action(&cur.obs, &cur.a_pre, &noise)?
        };
        let step = self.env.step(&action)?;
        let next_obs = step.obs.flatten();
        let a_pre_next = self.learner.base_action(&next_obs)?;
        let mut cur = self.current.take().expect("episode started");
        self.buffer.push(Transition {
            obs: cur.obs,
            action,
            reward: step.reward.total,
            next_obs: next_obs.clone(),
            a_pre: cur.a_pre,
            a_pre_next: a_pre_next.clone(),
            done: step.outcome.is_terminal(),
            truncated: step.outcome == EpisodeOutcome::Timeout,
        });
        self.timestep += 1;
        cur.ret += step.reward.total;
        cur.len += 1;
        if step.outcome.is_finished() {
            let rec = EpisodeRecord {
                timestep: self.timestep,
                index: self.episodes,
                outcome: step.outcome,
                ret: cur.ret,
                length: cur.len,
            };
            self.episodes += 1;
            return Ok(Some(rec));
        }
        cur.obs = next_obs;
        cur.a_pre = a_pre_next;
        self.current = Some(cur);
        Ok(None)
    }

    /// Whether update rounds run after the next collection phase.
    pub fn learning(&self) -> bool {
        self.timestep >= self.cfg.learning_starts && self.buffer.len() >= self.cfg.batch_size
    }

    /// `gradient_steps` update rounds on fresh minibatches.
    pub fn update(&mut self) -> Result<Vec<UpdateMetrics>> {
        let comp = self.learner.composition();
        let mut out = Vec::with_capacity(self.cfg.gradient_steps);
        for _ in 0..self.cfg.gradient_steps {
            let batch = self.buffer.sample(self.cfg.batch_size, &mut self.replay_rng)?;
            let m = self
                .learner
                .bundle_mut()
                .gradient_round(&batch, &self.cfg, comp, &mut self.update_rng)?;
            out.push(m);
        }
        Ok(out)
    }

    /// Collects exactly `train_freq` steps, then runs the update rounds
    /// once past the warm-up.
    pub fn train_iteration(&mut self) -> Result<IterationReport> {
        let mut report = IterationReport::default();
        for _ in 0..self.cfg.train_freq {
            if let Some(rec) = self.collect_step()? {
                report.episodes.push(rec);
            }
            report.steps += 1;
        }
        if self.learning() {
            report.updates = self.update()?;
        }
        Ok(report)
    }
}

/// Runs `seeds.len()` deterministic-action episodes, one per seed, with
/// tasks drawn from `tasks` using a stream keyed by the first seed.
pub fn evaluate_policy<L: Learner + ?Sized>(
    learner: &L,
    env: &mut GraspEnv,
    tasks: &TaskDistribution,
    episode_seeds: &[u64],
) -> Result<Vec<EpisodeOutcome>> {
    let mut task_rng = seeds::stream(episode_seeds.first().copied().unwrap_or(0), "eval-tasks");
    let mut outcomes = Vec::with_capacity(episode_seeds.len());
    for &seed in episode_seeds {
        let task = tasks.sample(&mut task_rng)?;
        let mut obs = env.reset(seed, &task)?.flatten();
        loop {
            let a_pre = learner.base_action(&obs)?;
            let a = learner.greedy_action(&obs, &a_pre)?;
            let step = env.step(&a)?;
            if step.outcome.is_finished() {
                outcomes.push(step.outcome);
                break;
            }
            obs = step.obs.flatten();
        }
    }
    Ok(outcomes)
}
