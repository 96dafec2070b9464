use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resprect::harness::{load_config, run_training, speedup_report, Mode, RunLog};
use resprect::Error;

/// Residual SAC grasp training and baselines.
///
/// Any run-configuration key may be given as a trailing `--key value` or
/// `--key=value` flag; these override the `--config` file.
#[derive(Parser)]
#[command(name = "resprect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Configuration overrides, `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train SAC from scratch (with demonstration prefill).
    Pretrain(RunArgs),
    /// Train a residual agent on top of a base checkpoint.
    TrainResidual {
        /// Skip the critic warm start (plain Residual ablation).
        #[arg(long)]
        plain: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fine-tune a base checkpoint directly.
    Finetune(RunArgs),
    /// Reptile meta-pretraining over a task family.
    ReptilePretrain(RunArgs),
    /// Roll out the scripted demonstration policy.
    DemoCollect(RunArgs),
    /// Deterministic evaluation of a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare when two episode logs first reach a success threshold.
    SpeedupReport {
        /// Candidate run, `episodes.csv`.
        a: PathBuf,
        /// Baseline run, `episodes.csv`.
        b: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        threshold: f32,
    },
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            return Err(Error::Config(format!("expected --key, found {a:?}")));
        };
        let (k, v) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("missing value for --{flag}")))?;
                (flag.to_string(), v.clone())
            }
        };
        out.push((k.replace('-', "_"), v));
    }
    Ok(out)
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidTask(_) | Error::UnknownFamily(_) | Error::InvalidArgument(_)
    )
}

fn run(run: RunArgs, mode: Mode, extra: Vec<(String, String)>) -> Result<(), Error> {
    let mut overrides = vec![("mode".to_string(), mode.as_str().to_string())];
    overrides.extend(extra);
    overrides.extend(parse_overrides(&run.overrides)?);
    let cfg = load_config(run.config.as_deref(), &overrides)?;
    let summary = run_training(&cfg)?;
    println!("run directory: {}", summary.dir.display());
    println!("timesteps: {}", summary.timesteps);
    if let Some(ma) = summary.log.last_success_ma() {
        println!("final success moving average: {ma:.3}");
    }
    if let Some(rate) = summary.success_rate {
        println!("success rate: {rate:.3}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pretrain(r) => run(r, Mode::Scratch, vec![]),
        Command::TrainResidual { plain, run: r } => {
            run(r, if plain { Mode::ResidualPlain } else { Mode::Resprect }, vec![])
        }
        Command::Finetune(r) => run(r, Mode::Finetune, vec![]),
        Command::ReptilePretrain(r) => run(r, Mode::Reptile, vec![]),
        Command::DemoCollect(r) => run(r, Mode::Demo, vec![]),
        Command::Evaluate { checkpoint, run: r } => {
            let extra = checkpoint
                .map(|p| vec![("base_checkpoint".to_string(), p.display().to_string())])
                .unwrap_or_default();
            run(r, Mode::Eval, extra)
        }
        Command::SpeedupReport { a, b, threshold } => {
            let report = speedup_report(&RunLog::read_csv(&a)?, &RunLog::read_csv(&b)?, threshold)?;
            println!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
