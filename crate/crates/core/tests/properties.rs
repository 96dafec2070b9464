use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resprect::baselines::reptile_outer_update;
use resprect::env::{
    flare_stack, EnvConfig, EpisodeOutcome, GraspEnv, TaskSpec, FAILURE_PENALTY, HELDOUT, SUCCESS_BONUS,
};
use resprect::harness::{speedup_report, Checkpoint, RunConfig, RunLog, Speedup, SUCCESS_WINDOW};
use resprect::nn::{HeadInit, MlpArch, ParamSet};
use resprect::residual::compose_action;
use resprect::sac::{sample_action, ReplayBuffer, Transition};
use resprect::Error;

fn arch() -> impl Strategy<Value = MlpArch> {
    (1usize..6, 1usize..6, 1usize..4).prop_map(|(i, h, o)| MlpArch::new(i, h, o))
}

fn params(arch: MlpArch, seed: u64) -> ParamSet {
    ParamSet::init(arch, HeadInit::FanIn, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn action(d: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..=1.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoint_round_trip_is_bit_exact(arch in arch(), seed in any::<u64>(), note in "[a-z0-9 ]{0,12}") {
        let p = params(arch, seed);
        let mut c = Checkpoint::new();
        c.set_meta("note", &note);
        c.push_params("net", &p);
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.meta("note").unwrap(), note.as_str());
        let q = back.params("net").unwrap();
        let bits = |p: &ParamSet| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&q), bits(&p));
        prop_assert_eq!(q.arch(), p.arch());
    }

    #[test]
    fn every_strict_prefix_is_truncated(arch in arch(), cut in 0.0f64..1.0) {
        let mut c = Checkpoint::new();
        c.push_params("net", &params(arch, 1));
        let bytes = c.to_bytes().unwrap();
        let n = (cut * bytes.len() as f64) as usize;
        prop_assert!(matches!(Checkpoint::from_bytes(&bytes[..n]), Err(Error::Truncated(_))));
    }

    #[test]
    fn reptile_update_lies_between_meta_and_task(arch in arch(), s1 in any::<u64>(), s2 in any::<u64>(), eps in 0.0f32..=1.0) {
        let (m, t) = (params(arch, s1), params(arch, s2));
        let out = reptile_outer_update(&[m.clone()], &[t.clone()], eps).unwrap();
        for ((o, a), b) in out[0].flatten().iter().zip(m.flatten()).zip(t.flatten()) {
            let (lo, hi) = (a.min(b), a.max(b));
            let slack = 2.0 * f32::EPSILON * hi.abs().max(lo.abs());
            prop_assert!(*o >= lo - slack && *o <= hi + slack, "{o} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn reptile_rejects_shape_mismatch(a in arch(), b in arch()) {
        prop_assume!(a != b);
        prop_assert!(reptile_outer_update(&[params(a, 0)], &[params(b, 0)], 0.5).is_err());
    }

    #[test]
    fn flare_is_linear(
        x in prop::collection::vec(-10.0f32..10.0, 24),
        y in prop::collection::vec(-10.0f32..10.0, 24),
    ) {
        let f = |v: &[f32]| flare_stack(&v[..8], &v[8..16], &v[16..]).unwrap();
        let sum: Vec<f32> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        for ((s, a), b) in f(&sum).iter().zip(f(&x)).zip(f(&y)) {
            prop_assert!((s - (a + b)).abs() <= 1e-4 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn composed_action_is_bounded(a_pre in action(7), a_rl in action(7), scale in 0.01f32..=1.0) {
        let a = compose_action(&a_pre, &a_rl, scale).unwrap();
        prop_assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        let zero = compose_action(&a_pre, &[0.0; 7], scale).unwrap();
        prop_assert_eq!(zero, a_pre);
    }

    #[test]
    fn sampled_actions_are_inside_and_finite(seed in any::<u64>(), noise in prop::collection::vec(-6.0f32..6.0, 3)) {
        let actor = params(MlpArch::new(4, 5, 6), seed);
        let (a, lp) = sample_action(&actor, &[0.3, -2.0, 5.0, 1.0], &noise).unwrap();
        prop_assert!(a.iter().all(|v| v.abs() < 1.0));
        prop_assert!(lp.is_finite());
    }

    #[test]
    fn replay_length_is_min_of_pushes_and_capacity(cap in 1usize..20, pushes in 0usize..50) {
        let mut buf = ReplayBuffer::new(cap).unwrap();
        for i in 0..pushes {
            buf.push(Transition {
                obs: vec![i as f32],
                action: vec![0.0],
                reward: 0.0,
                next_obs: vec![0.0],
                a_pre: vec![0.0],
                a_pre_next: vec![0.0],
                done: false,
                truncated: false,
            });
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        let kept: Vec<f32> = buf.iter_fifo().map(|t| t.obs[0]).collect();
        let expected: Vec<f32> = (pushes.saturating_sub(cap)..pushes).map(|i| i as f32).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn moving_average_uses_last_window(outcomes in prop::collection::vec(any::<bool>(), 1..80)) {
        let mut log = RunLog::new();
        for (i, &s) in outcomes.iter().enumerate() {
            let o = if s { EpisodeOutcome::Success } else { EpisodeOutcome::Timeout };
            let row = log.push(100 * (i as u64 + 1), o, 0.0, 100).unwrap().clone();
            let window = &outcomes[(i + 1).saturating_sub(SUCCESS_WINDOW)..=i];
            let want = window.iter().filter(|&&s| s).count() as f32 / window.len() as f32;
            prop_assert!((row.success_ma - want).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_curves_have_unit_speedup(outcomes in prop::collection::vec(any::<bool>(), 1..60), th in 0.0f32..=1.0) {
        let mut log = RunLog::new();
        for (i, &s) in outcomes.iter().enumerate() {
            let o = if s { EpisodeOutcome::Success } else { EpisodeOutcome::Timeout };
            log.push(10 * (i as u64 + 1), o, 0.0, 10).unwrap();
        }
        match speedup_report(&log, &log, th).unwrap() {
            Speedup::Ratio { ratio, .. } => prop_assert_eq!(ratio, 1.0),
            Speedup::NotReached => prop_assert!(log.first_reaching(th).is_none()),
            other => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn config_echo_round_trips(gamma in 0.0f32..0.999, tau in 0.001f32..1.0, seed in any::<u64>(), hidden in 1usize..4096) {
        let mut cfg = RunConfig::default();
        cfg.set("gamma", &gamma.to_string()).unwrap();
        cfg.set("tau", &tau.to_string()).unwrap();
        cfg.set("seed", &seed.to_string()).unwrap();
        cfg.set("hidden_units", &hidden.to_string()).unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.echo()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn env_is_deterministic_and_rewards_bounded(
        seed in any::<u64>(),
        task in 0usize..HELDOUT.len(),
        actions in prop::collection::vec(action(7), 1..100),
    ) {
        let task = TaskSpec::heldout(HELDOUT[task].0).unwrap();
        let run = || {
            let mut env = GraspEnv::new(EnvConfig::default()).unwrap();
            let mut trace = vec![env.reset(seed, &task).unwrap().flatten()];
            for a in &actions {
                let r = env.step(a).unwrap();
                let world = env.world().unwrap();
                for (i, &t) in r.obs.tactile.iter().enumerate() {
                    assert_eq!(t == 1.0, world.touching(i), "tactile {i} disagrees with geometry");
                }
                assert!(
                    (2.0 * FAILURE_PENALTY..=SUCCESS_BONUS + 1.0).contains(&r.reward.total),
                    "reward {} out of bounds",
                    r.reward.total
                );
                trace.push(r.obs.flatten());
                trace.push(vec![r.reward.total]);
                if r.outcome.is_finished() {
                    break;
                }
            }
            trace
        };
        let (a, b) = (run(), run());
        let bits = |t: &Vec<Vec<f32>>| t.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }
}
