//! Run drivers: one entry point per mode, writing a self-describing run
//! directory.
//!
//! Directory contents: `config.txt` (effective configuration),
//! `episodes.csv`, `updates.csv`, `checkpoints/step_<t>.ckpt` every 10% of
//! the budget, `final.ckpt`, `eval.csv` for evaluation modes, `evals.csv`
//! for periodic evaluation, `meta.csv` for Reptile, and `status.txt`.

use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::config::{Mode, RunConfig};
use super::runlog::{RunLog, UpdateLog};
use crate::baselines::{
    collect_demonstrations, evaluate_pretrained, finetune_init, prefill_with_demonstrations, reptile_pretrain,
    success_rate, InnerLoop,
};
use crate::env::{EpisodeOutcome, GraspEnv, TaskDistribution};
use crate::nn::HeadInit;
use crate::residual::{PretrainedPolicy, ResidualAgent, ResidualSpec};
use crate::sac::{AgentBundle, BundleSpec, Learner, SacConfig, Trainer};
use crate::seeds;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub log: RunLog,
    pub final_checkpoint: Option<PathBuf>,
    /// Success rate of evaluation modes.
    pub success_rate: Option<f32>,
    /// Training stopped at `stop_at_success`.
    pub stopped_early: bool,
    pub timesteps: u64,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Executes the configured mode in `cfg.out_dir`. Failures are recorded in
/// `status.txt` before being returned.
pub fn run_training(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("config.txt"), &cfg.echo())?;
    let result = match cfg.mode {
        Mode::Scratch => run_scratch(cfg, &dir),
        Mode::Resprect | Mode::ResidualPlain => run_residual(cfg, &dir),
        Mode::Finetune => run_finetune(cfg, &dir),
        Mode::Reptile => run_reptile(cfg, &dir),
        Mode::Demo => run_demo(cfg, &dir),
        Mode::Eval => run_eval(cfg, &dir),
    };
    let status = match &result {
        Ok(_) => "ok\n".to_string(),
        Err(e) => format!("failed: {e}\n"),
    };
    write(&dir.join("status.txt"), &status)?;
    result
}

pub fn bundle_spec(cfg: &RunConfig, residual_actor: bool) -> BundleSpec {
    BundleSpec {
        obs_dim: cfg.env.obs_dim(),
        action_dim: cfg.env.action_dim(),
        hidden: cfg.hidden_units,
        residual_actor,
        actor_head: if residual_actor { HeadInit::Zero } else { HeadInit::FanIn },
        init_alpha: cfg.init_entropy_coef,
        target_entropy: cfg.resolved_target_entropy(),
        adam: cfg.adam(),
    }
}

fn stamp(mut c: Checkpoint, cfg: &RunConfig, step: u64) -> Checkpoint {
    c.set_meta("mode", cfg.mode);
    c.set_meta("config_hash", cfg.hash());
    c.set_meta("created_step", step);
    c.set_meta("task", &cfg.task);
    c
}

/// Loads the configured base checkpoint as a frozen policy matching the
/// run's environment.
pub fn load_base(cfg: &RunConfig) -> Result<PretrainedPolicy> {
    let path = cfg
        .base_checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config(format!("mode {} requires base_checkpoint", cfg.mode)))?;
    let base = Checkpoint::load(path)?.pretrained_policy()?;
    if base.obs_dim() != cfg.env.obs_dim() || base.action_dim() != cfg.env.action_dim() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "base policy expects obs {} / action {}, environment has {} / {}",
            base.obs_dim(),
            base.action_dim(),
            cfg.env.obs_dim(),
            cfg.env.action_dim()
        )));
    }
    Ok(base)
}

fn run_scratch(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let spec = bundle_spec(cfg, false);
    let bundle = AgentBundle::new(&spec, &mut seeds::stream(cfg.seed, "init"));
    train(cfg, dir, bundle, cfg.sac(), cfg.demo_episodes, Checkpoint::from_bundle)
}

fn run_residual(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let base = load_base(cfg)?;
    let spec = ResidualSpec {
        residual_scale: cfg.residual_scale,
        warm_start: cfg.mode == Mode::Resprect,
        init_alpha: cfg.init_entropy_coef,
        target_entropy: cfg.resolved_target_entropy(),
        adam: cfg.adam(),
    };
    let agent = ResidualAgent::new(base, &spec, &mut seeds::stream(cfg.seed, "init"))?;
    train(cfg, dir, agent, cfg.sac(), 0, Checkpoint::from_residual)
}

fn run_finetune(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let base = load_base(cfg)?;
    let spec = BundleSpec {
        hidden: base.hidden(),
        ..bundle_spec(cfg, false)
    };
    let bundle = finetune_init(&base, &spec);
    let sac = SacConfig {
        gradient_steps: cfg.finetune_gradient_steps,
        ..cfg.sac()
    };
    train(cfg, dir, bundle, sac, 0, Checkpoint::from_bundle)
}

fn train<L: Learner>(
    cfg: &RunConfig,
    dir: &Path,
    learner: L,
    sac: SacConfig,
    demo_episodes: usize,
    to_checkpoint: impl Fn(&L) -> Checkpoint,
) -> Result<RunSummary> {
    let tasks = TaskDistribution::named(&cfg.task)?;
    let env = GraspEnv::new(cfg.env.clone())?;
    let mut trainer = Trainer::new(learner, env, tasks.clone(), sac, cfg.buffer_size, cfg.seed)?;
    prefill_with_demonstrations(
        &mut trainer,
        &tasks,
        demo_episodes,
        seeds::derive_seed(cfg.seed, "demo-prefill"),
    )?;
    let total = cfg.total_timesteps;
    let cadence = (total / 10).max(1);
    let mut next_checkpoint = cadence;
    let mut next_eval = cfg.eval_interval;
    let mut log = RunLog::new();
    let mut updates = UpdateLog::default();
    let mut evals = String::from("timestep,success_rate\n");
    let mut stopped_early = false;
    let ckpt_dir = dir.join("checkpoints");
    while trainer.timestep() < total {
        let report = trainer.train_iteration()?;
        let t = trainer.timestep();
        for e in &report.episodes {
            log.push_record(e, 0)?;
        }
        updates.push(t, trainer.learner.bundle().update_count(), &report.updates);
        while next_checkpoint < total && t >= next_checkpoint {
            stamp(to_checkpoint(&trainer.learner), cfg, t).save(&ckpt_dir.join(format!("step_{next_checkpoint:010}.ckpt")))?;
            next_checkpoint += cadence;
        }
        if cfg.eval_interval > 0 && t >= next_eval {
            let (rate, _) = evaluate_pretrained(
                &trainer.learner,
                &cfg.env,
                &tasks,
                cfg.eval_episodes,
                seeds::derive_seed(cfg.seed, "periodic-eval"),
            )?;
            evals.push_str(&format!("{t},{rate}\n"));
            next_eval += cfg.eval_interval;
        }
        if let (Some(stop), Some(ma)) = (cfg.stop_at_success, log.last_success_ma()) {
            if !report.episodes.is_empty() && ma >= stop {
                stopped_early = true;
                break;
            }
        }
    }
    log.write_csv(&dir.join("episodes.csv"))?;
    updates.write_csv(&dir.join("updates.csv"))?;
    if cfg.eval_interval > 0 {
        write(&dir.join("evals.csv"), &evals)?;
    }
    let final_path = dir.join("final.ckpt");
    stamp(to_checkpoint(&trainer.learner), cfg, trainer.timestep()).save(&final_path)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        log,
        final_checkpoint: Some(final_path),
        success_rate: None,
        stopped_early,
        timesteps: trainer.timestep(),
    })
}

fn run_reptile(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let spec = bundle_spec(cfg, false);
    let meta = match &cfg.base_checkpoint {
        Some(p) => finetune_init(&Checkpoint::load(p)?.pretrained_policy()?, &spec),
        None => AgentBundle::new(&spec, &mut seeds::stream(cfg.seed, "init")),
    };
    let spec = BundleSpec {
        hidden: meta.critic1.arch().hidden,
        ..spec
    };
    let inner = InnerLoop {
        env: cfg.env.clone(),
        sac: SacConfig {
            learning_starts: 0,
            ..cfg.sac()
        },
        spec,
        demo_episodes: cfg.demo_episodes,
        steps: cfg.reptile_inner_steps,
        buffer_capacity: cfg.buffer_size,
    };
    let iterations = cfg.total_timesteps.div_ceil(cfg.reptile_inner_steps);
    let cadence = (iterations / 10).max(1);
    let tasks = TaskDistribution::named(&cfg.task)?;
    let mut log = RunLog::new();
    let mut meta_csv = String::from("iteration,task,timestep,inner_updates,inner_success_rate\n");
    let mut offset = 0u64;
    let ckpt_dir = dir.join("checkpoints");
    let meta = reptile_pretrain(meta, &tasks, &inner, cfg.reptile_eps, iterations, cfg.seed, |it, meta| {
        for e in &it.episodes {
            log.push_record(e, offset)?;
        }
        offset += it.inner_steps;
        let outcomes: Vec<EpisodeOutcome> = it.episodes.iter().map(|e| e.outcome).collect();
        meta_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            it.index,
            it.task,
            offset,
            it.inner_updates,
            success_rate(&outcomes)
        ));
        if (it.index + 1) % cadence == 0 && it.index + 1 < iterations {
            stamp(Checkpoint::from_bundle(meta), cfg, offset)
                .save(&ckpt_dir.join(format!("step_{offset:010}.ckpt")))?;
        }
        Ok(())
    })?;
    log.write_csv(&dir.join("episodes.csv"))?;
    write(&dir.join("meta.csv"), &meta_csv)?;
    let final_path = dir.join("final.ckpt");
    stamp(Checkpoint::from_bundle(&meta), cfg, offset).save(&final_path)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        log,
        final_checkpoint: Some(final_path),
        success_rate: None,
        stopped_early: false,
        timesteps: offset,
    })
}

fn write_outcomes(path: &Path, seeds: &[u64], outcomes: &[EpisodeOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "seed", "outcome"])?;
    for (i, (s, o)) in seeds.iter().zip(outcomes).enumerate() {
        w.write_record([i.to_string(), s.to_string(), o.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_demo(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let tasks = TaskDistribution::named(&cfg.task)?;
    let mut env = GraspEnv::new(cfg.env.clone())?;
    let (transitions, outcomes) = collect_demonstrations(&mut env, &tasks, cfg.eval_episodes, cfg.seed)?;
    let mut log = RunLog::new();
    let mut t = 0u64;
    let mut i = 0usize;
    for &o in &outcomes {
        let start = i;
        while !(transitions[i].done || transitions[i].truncated) {
            i += 1;
        }
        i += 1;
        t += (i - start) as u64;
        let ret = transitions[start..i].iter().map(|x| x.reward).sum();
        log.push(t, o, ret, (i - start) as u32)?;
    }
    log.write_csv(&dir.join("episodes.csv"))?;
    let ids: Vec<u64> = (0..outcomes.len() as u64).collect();
    write_outcomes(&dir.join("eval.csv"), &ids, &outcomes)?;
    let rate = success_rate(&outcomes);
    write(&dir.join("success_rate.txt"), &format!("{rate}\n"))?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        log,
        final_checkpoint: None,
        success_rate: Some(rate),
        stopped_early: false,
        timesteps: t,
    })
}

/// Deterministic evaluation of the base checkpoint (plain or residual).
fn run_eval(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let path = cfg.base_checkpoint.as_ref().expect("validated");
    let ckpt = Checkpoint::load(path)?;
    let tasks = TaskDistribution::named(&cfg.task)?;
    let (rate, outcomes) = if ckpt.meta("kind")? == "residual" {
        let scale = ckpt
            .meta("residual_scale")?
            .parse()
            .map_err(|_| Error::MalformedCheckpoint("residual_scale".into()))?;
        let agent = ResidualAgent::assemble(ckpt.agent_bundle(cfg.adam())?, ckpt.residual_base()?, scale)?;
        evaluate_pretrained(&agent, &cfg.env, &tasks, cfg.eval_episodes, cfg.seed)?
    } else {
        let bundle = ckpt.agent_bundle(cfg.adam())?;
        evaluate_pretrained(&bundle, &cfg.env, &tasks, cfg.eval_episodes, cfg.seed)?
    };
    let seeds = crate::baselines::evaluation_seeds(cfg.seed, cfg.eval_episodes);
    write_outcomes(&dir.join("eval.csv"), &seeds, &outcomes)?;
    write(&dir.join("success_rate.txt"), &format!("{rate}\n"))?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        log: RunLog::new(),
        final_checkpoint: None,
        success_rate: Some(rate),
        stopped_early: false,
        timesteps: 0,
    })
}
