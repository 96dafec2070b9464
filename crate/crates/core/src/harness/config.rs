//! Run configuration: flat `key = value` files with `#` comments, layered
//! as defaults ← file ← command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::env::{EnvConfig, TaskDistribution};
use crate::nn::AdamConfig;
use crate::sac::SacConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// SAC from scratch, optionally with a demo-prefilled buffer.
    Scratch,
    /// Residual policy with critics warm-started from the base.
    Resprect,
    /// Residual policy with fresh critics.
    ResidualPlain,
    Finetune,
    /// Reptile meta-pretraining.
    Reptile,
    /// Scripted demonstrations only.
    Demo,
    /// Deterministic evaluation of a checkpoint.
    Eval,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Scratch => "scratch",
            Mode::Resprect => "resprect",
            Mode::ResidualPlain => "residual_plain",
            Mode::Finetune => "finetune",
            Mode::Reptile => "reptile",
            Mode::Demo => "demo",
            Mode::Eval => "eval",
        }
    }

    pub fn needs_base(self) -> bool {
        matches!(self, Mode::Resprect | Mode::ResidualPlain | Mode::Finetune | Mode::Eval)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Mode::Scratch,
            Mode::Resprect,
            Mode::ResidualPlain,
            Mode::Finetune,
            Mode::Reptile,
            Mode::Demo,
            Mode::Eval,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub optimizer: String,
    pub learning_rate: f64,
    pub gamma: f32,
    pub buffer_size: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub batch_size: usize,
    /// `None` means `-action_dim`.
    pub target_entropy: Option<f32>,
    pub nonlinearity: String,
    pub tau: f32,
    pub target_update_interval: u64,
    pub gradient_steps: usize,
    pub train_freq: usize,
    pub total_timesteps: u64,
    pub init_entropy_coef: f32,
    pub fixed_alpha: bool,
    pub learning_starts: u64,

    pub mode: Mode,
    pub seed: u64,
    /// `pretrain` or a held-out object name.
    pub task: String,
    pub base_checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub residual_scale: f32,
    pub demo_episodes: usize,
    pub finetune_gradient_steps: usize,
    pub reptile_eps: f32,
    pub reptile_inner_steps: u64,
    pub eval_episodes: usize,
    /// Evaluate every this many timesteps during training; 0 disables.
    pub eval_interval: u64,
    /// Stop once the moving-average success reaches this value.
    pub stop_at_success: Option<f32>,

    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            optimizer: "adam".into(),
            learning_rate: 3e-4,
            gamma: 0.99,
            buffer_size: 1_000_000,
            hidden_layers: 2,
            hidden_units: 1024,
            batch_size: 256,
            target_entropy: None,
            nonlinearity: "relu".into(),
            tau: 0.005,
            target_update_interval: 1,
            gradient_steps: 10,
            train_freq: 10,
            total_timesteps: 1_000_000,
            init_entropy_coef: 0.01,
            fixed_alpha: false,
            learning_starts: 1000,
            mode: Mode::Scratch,
            seed: 0,
            task: "pretrain".into(),
            base_checkpoint: None,
            out_dir: PathBuf::from("runs/default"),
            residual_scale: 1.0,
            demo_episodes: 50,
            finetune_gradient_steps: 1,
            reptile_eps: 0.1,
            reptile_inner_steps: 1000,
            eval_episodes: 100,
            eval_interval: 0,
            stop_at_success: None,
            env: EnvConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn opt_to_string<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), T::to_string)
}

impl RunConfig {
    /// Every key with its current value, in echo order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let e = &self.env;
        vec![
            ("optimizer", self.optimizer.clone()),
            ("learning_rate", self.learning_rate.to_string()),
            ("gamma", self.gamma.to_string()),
            ("buffer_size", self.buffer_size.to_string()),
            ("hidden_layers", self.hidden_layers.to_string()),
            ("hidden_units", self.hidden_units.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("target_entropy", opt_to_string(&self.target_entropy, "auto")),
            ("nonlinearity", self.nonlinearity.clone()),
            ("tau", self.tau.to_string()),
            ("target_update_interval", self.target_update_interval.to_string()),
            ("gradient_steps", self.gradient_steps.to_string()),
            ("train_freq", self.train_freq.to_string()),
            ("total_timesteps", self.total_timesteps.to_string()),
            ("init_entropy_coef", self.init_entropy_coef.to_string()),
            ("fixed_alpha", self.fixed_alpha.to_string()),
            ("learning_starts", self.learning_starts.to_string()),
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("task", self.task.clone()),
            (
                "base_checkpoint",
                opt_to_string(&self.base_checkpoint.as_ref().map(|p| p.display().to_string()), "none"),
            ),
            ("out_dir", self.out_dir.display().to_string()),
            ("residual_scale", self.residual_scale.to_string()),
            ("demo_episodes", self.demo_episodes.to_string()),
            ("finetune_gradient_steps", self.finetune_gradient_steps.to_string()),
            ("reptile_eps", self.reptile_eps.to_string()),
            ("reptile_inner_steps", self.reptile_inner_steps.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("stop_at_success", opt_to_string(&self.stop_at_success, "none")),
            ("fingers", e.fingers.to_string()),
            ("max_steps", e.max_steps.to_string()),
            ("max_translation", e.max_translation.to_string()),
            ("max_rotation", e.max_rotation.to_string()),
            ("max_joint", e.max_joint.to_string()),
            ("displacement_limit", e.displacement_limit.to_string()),
            ("lift_success", e.lift_success.to_string()),
            ("pregrasp_distance", e.pregrasp_distance.to_string()),
            ("pregrasp_noise", e.pregrasp_noise.to_string()),
            ("feature_noise", e.feature_noise.to_string()),
            ("estimate_noise", e.estimate_noise.to_string()),
            ("placement_radius", e.placement_radius.to_string()),
            ("reach_only", e.reach_only.to_string()),
            ("reach_tolerance", e.reach_tolerance.to_string()),
        ]
    }

    /// Sets one key from its textual value; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let e = &mut self.env;
        match key.trim() {
            "optimizer" => self.optimizer = v.to_string(),
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "buffer_size" => self.buffer_size = parse(key, v)?,
            "hidden_layers" => self.hidden_layers = parse(key, v)?,
            "hidden_units" => self.hidden_units = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "target_entropy" => {
                self.target_entropy = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "nonlinearity" => self.nonlinearity = v.to_string(),
            "tau" => self.tau = parse(key, v)?,
            "target_update_interval" => self.target_update_interval = parse(key, v)?,
            "gradient_steps" => self.gradient_steps = parse(key, v)?,
            "train_freq" => self.train_freq = parse(key, v)?,
            "total_timesteps" => self.total_timesteps = parse(key, v)?,
            "init_entropy_coef" => self.init_entropy_coef = parse(key, v)?,
            "fixed_alpha" => self.fixed_alpha = parse_bool(key, v)?,
            "learning_starts" => self.learning_starts = parse(key, v)?,
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "task" => self.task = v.to_string(),
            "base_checkpoint" => {
                self.base_checkpoint = if v == "none" || v.is_empty() { None } else { Some(PathBuf::from(v)) }
            }
            "out_dir" => self.out_dir = PathBuf::from(v),
            "residual_scale" => self.residual_scale = parse(key, v)?,
            "demo_episodes" => self.demo_episodes = parse(key, v)?,
            "finetune_gradient_steps" => self.finetune_gradient_steps = parse(key, v)?,
            "reptile_eps" => self.reptile_eps = parse(key, v)?,
            "reptile_inner_steps" => self.reptile_inner_steps = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "stop_at_success" => {
                self.stop_at_success = if v == "none" { None } else { Some(parse(key, v)?) }
            }
            "fingers" => e.fingers = parse(key, v)?,
            "max_steps" => e.max_steps = parse(key, v)?,
            "max_translation" => e.max_translation = parse(key, v)?,
            "max_rotation" => e.max_rotation = parse(key, v)?,
            "max_joint" => e.max_joint = parse(key, v)?,
            "displacement_limit" => e.displacement_limit = parse(key, v)?,
            "lift_success" => e.lift_success = parse(key, v)?,
            "pregrasp_distance" => e.pregrasp_distance = parse(key, v)?,
            "pregrasp_noise" => e.pregrasp_noise = parse(key, v)?,
            "feature_noise" => e.feature_noise = parse(key, v)?,
            "estimate_noise" => e.estimate_noise = parse(key, v)?,
            "placement_radius" => e.placement_radius = parse(key, v)?,
            "reach_only" => e.reach_only = parse_bool(key, v)?,
            "reach_tolerance" => e.reach_tolerance = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.optimizer != "adam" {
            return bad(format!("optimizer {:?} unsupported (only adam)", self.optimizer));
        }
        if self.nonlinearity != "relu" {
            return bad(format!("nonlinearity {:?} unsupported (only relu)", self.nonlinearity));
        }
        if self.hidden_layers != 2 {
            return bad(format!("hidden_layers {} unsupported (only 2)", self.hidden_layers));
        }
        if self.hidden_units == 0 || self.buffer_size == 0 {
            return bad("hidden_units and buffer_size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.init_entropy_coef.is_finite() && self.init_entropy_coef > 0.0) {
            return bad(format!("init_entropy_coef {} must be positive", self.init_entropy_coef));
        }
        if self.target_entropy.is_some_and(|t| !t.is_finite()) {
            return bad("target_entropy must be finite".into());
        }
        if !(self.residual_scale > 0.0 && self.residual_scale <= 1.0) {
            return bad(format!("residual_scale {} outside (0, 1]", self.residual_scale));
        }
        if !(self.reptile_eps > 0.0 && self.reptile_eps <= 1.0) {
            return bad(format!("reptile_eps {} outside (0, 1]", self.reptile_eps));
        }
        if self.reptile_inner_steps == 0 {
            return bad("reptile_inner_steps must be positive".into());
        }
        if let Some(s) = self.stop_at_success {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("stop_at_success {s} outside [0, 1]"));
            }
        }
        if self.mode.needs_base() && self.base_checkpoint.is_none() {
            return bad(format!("mode {} requires base_checkpoint", self.mode));
        }
        if matches!(self.mode, Mode::Demo | Mode::Eval) && self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        TaskDistribution::named(&self.task).map_err(|e| Error::Config(e.to_string()))?;
        self.sac().validate()?;
        self.env.validate()
    }

    /// The echoed configuration: one `key = value` line per field.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Hex SHA-256 of [`Self::echo`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.echo().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn sac(&self) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            tau: self.tau,
            batch_size: self.batch_size,
            gradient_steps: self.gradient_steps,
            train_freq: self.train_freq,
            learning_starts: self.learning_starts,
            target_update_interval: self.target_update_interval,
            fixed_alpha: self.fixed_alpha,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn resolved_target_entropy(&self) -> f32 {
        self.target_entropy
            .unwrap_or(-(self.env.action_dim() as f32))
    }
}

/// Defaults, then the file at `path` (if any), then `overrides` in order;
/// validated.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        cfg.apply_text(&text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("learning_rate", "0.001").unwrap();
        cfg.set("stop_at_success", "0.6").unwrap();
        cfg.set("target_entropy", "-3.5").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# header\n\n gamma = 0.5  # trailing\n").unwrap();
        assert_eq!(cfg.gamma, 0.5);
        assert!(cfg.apply_text("gamma 0.5").is_err());
    }

    #[test]
    fn type_errors() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("batch_size", "big").is_err());
        assert!(cfg.set("fixed_alpha", "yes").is_err());
        assert!(cfg.set("mode", "magic").is_err());
    }
}
