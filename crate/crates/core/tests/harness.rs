use std::path::Path;
use std::process::Command;

use resprect::harness::{load_config, run_training, Checkpoint, Mode, RunConfig, RunLog, EPISODE_SCHEMA};
use resprect::Error;

fn small(dir: &Path, mode: Mode) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.mode = mode;
    cfg.hidden_units = 16;
    cfg.batch_size = 16;
    cfg.total_timesteps = 400;
    cfg.learning_starts = 200;
    cfg.demo_episodes = 2;
    cfg.eval_episodes = 2;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resprect"))
}

#[test]
fn zero_budget_gives_an_empty_valid_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path(), Mode::Scratch);
    cfg.total_timesteps = 0;
    let summary = run_training(&cfg).unwrap();
    assert_eq!(summary.timesteps, 0);
    assert!(summary.log.rows().is_empty());
    let log = RunLog::read_csv(&tmp.path().join("episodes.csv")).unwrap();
    assert!(log.rows().is_empty());
    assert_eq!(std::fs::read_to_string(tmp.path().join("status.txt")).unwrap(), "ok\n");
}

#[test]
fn scratch_run_writes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_training(&small(tmp.path(), Mode::Scratch)).unwrap();
    assert_eq!(summary.timesteps, 400);
    for f in ["config.txt", "episodes.csv", "updates.csv", "status.txt", "final.ckpt"] {
        assert!(tmp.path().join(f).exists(), "missing {f}");
    }
    let episodes = std::fs::read_to_string(tmp.path().join("episodes.csv")).unwrap();
    assert!(episodes.starts_with(EPISODE_SCHEMA));
    let ckpt = Checkpoint::load(&tmp.path().join("final.ckpt")).unwrap();
    assert_eq!(ckpt.meta("mode").unwrap(), "scratch");
    let echoed = std::fs::read_to_string(tmp.path().join("config.txt")).unwrap();
    let mut back = RunConfig::default();
    back.apply_text(&echoed).unwrap();
    assert_eq!(back, small(tmp.path(), Mode::Scratch));
}

#[test]
fn residual_modes_require_a_base() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in [Mode::Resprect, Mode::ResidualPlain, Mode::Finetune, Mode::Eval] {
        let err = run_training(&small(tmp.path(), mode)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{mode}: {err}");
    }
}

#[test]
fn residual_run_on_a_pretrained_base() {
    let tmp = tempfile::tempdir().unwrap();
    let base = run_training(&small(&tmp.path().join("base"), Mode::Scratch)).unwrap();
    let mut cfg = small(&tmp.path().join("res"), Mode::Resprect);
    cfg.task = "marker".into();
    cfg.base_checkpoint = base.final_checkpoint.clone();
    let res = run_training(&cfg).unwrap();

    let mut eval = small(&tmp.path().join("eval"), Mode::Eval);
    eval.task = "marker".into();
    eval.base_checkpoint = res.final_checkpoint;
    let rate = run_training(&eval).unwrap().success_rate.unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(tmp.path().join("eval/eval.csv").exists());
}

#[test]
fn base_with_wrong_width_is_incompatible() {
    let tmp = tempfile::tempdir().unwrap();
    let base = run_training(&small(&tmp.path().join("base"), Mode::Scratch)).unwrap();
    let mut cfg = small(&tmp.path().join("ft"), Mode::Finetune);
    cfg.base_checkpoint = base.final_checkpoint;
    cfg.env.fingers = cfg.env.fingers + 1;
    let err = run_training(&cfg);
    assert!(err.is_err());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let base = run_training(&small(&tmp.path().join("base"), Mode::Scratch)).unwrap();
    let bytes = std::fs::read(base.final_checkpoint.unwrap()).unwrap();

    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::BadMagic)));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));

    let path = tmp.path().join("short.ckpt");
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let mut cfg = small(&tmp.path().join("eval"), Mode::Eval);
    cfg.base_checkpoint = Some(path);
    assert!(matches!(run_training(&cfg), Err(Error::Truncated(_))));
    let status = std::fs::read_to_string(tmp.path().join("eval/status.txt")).unwrap();
    assert!(status.starts_with("failed:"));
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.cfg");
    std::fs::write(&path, "# comment\ngamma = 0.9\nseed = 3\n").unwrap();
    let cfg = load_config(Some(&path), &[("seed".into(), "7".into())]).unwrap();
    assert_eq!(cfg.gamma, 0.9);
    assert_eq!(cfg.seed, 7);
    assert!(load_config(Some(&path), &[("no_such_key".into(), "1".into())]).is_err());
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let ok = cli()
        .args(["pretrain", "--hidden-units", "16", "--batch-size=16", "--total-timesteps", "300"])
        .args(["--learning-starts", "100", "--demo-episodes", "1", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("final.ckpt").exists());

    let invalid = cli().args(["pretrain", "--gamma", "nope"]).output().unwrap();
    assert_eq!(invalid.status.code(), Some(1));
    let no_base = cli().args(["train-residual", "--out-dir"]).arg(tmp.path().join("r")).output().unwrap();
    assert_eq!(no_base.status.code(), Some(1));

    let missing = cli()
        .args(["evaluate", "--checkpoint"])
        .arg(tmp.path().join("absent.ckpt"))
        .args(["--out-dir"])
        .arg(tmp.path().join("e"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let csv = out.join("episodes.csv");
    let report = cli().args(["speedup-report"]).arg(&csv).arg(&csv).output().unwrap();
    assert!(report.status.success());
}
