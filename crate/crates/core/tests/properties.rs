use std::collections::HashSet;

use proptest::prelude::*;

use ogc_core::agents::greedy_policy;
use ogc_core::curriculum::{
    insert_or_update, maxmc_score_with, relative_regret, replay_distribution, EpisodeSummary,
    LevelBuffer, PlrConfig, ReturnTracker,
};
use ogc_core::env::{Action, Env, EnvConfig};
use ogc_core::generator::{sample_level, GeneratorConfig};
use ogc_core::harness::{is_solved, rollout, HarnessConfig};
use ogc_core::level::{parse_ascii, render_ascii, Level, Tile};
use ogc_core::mutator::{apply_op, mutate, MutationOp, MutatorConfig};
use ogc_core::rng::seeded;
use ogc_core::teacher::{replay_script, script_for_level, TeacherConfig};

fn level_from(seed: u64) -> Level {
    sample_level(&mut seeded(seed), &GeneratorConfig::default()).unwrap()
}

fn action() -> impl Strategy<Value = Action> {
    (0..6usize).prop_map(|i| Action::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>()) {
        // ASCII has no agent order, so identity holds on the text.
        let level = level_from(seed);
        let text = render_ascii(&level);
        let back = parse_ascii(&text).unwrap();
        prop_assert_eq!(render_ascii(&back), text);
        prop_assert_eq!(back.grid(), level.grid());
        let starts = |l: &Level| {
            let mut v = l.agents().to_vec();
            v.sort_by_key(|a| a.pos);
            v
        };
        prop_assert_eq!(starts(&back), starts(&level));
    }

    #[test]
    fn digest_ignores_edit_history(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let level = level_from(seed);
        let cells: Vec<_> = level
            .cells()
            .filter(|&p| apply_op(&level, MutationOp::ToggleWall { cell: p }).is_ok())
            .collect();
        prop_assume!(!cells.is_empty());
        let cell = cells[pick.index(cells.len())];
        let once = apply_op(&level, MutationOp::ToggleWall { cell }).unwrap();
        let twice = apply_op(&once, MutationOp::ToggleWall { cell }).unwrap();
        prop_assert_ne!(once.digest(), level.digest());
        prop_assert_eq!(twice.digest(), level.digest());
    }

    #[test]
    fn generated_levels_respect_budgets(seed in any::<u64>()) {
        let level = level_from(seed);
        prop_assert!(level.validate().valid);
        prop_assert!(level.interior_wall_count() <= 15);
        for t in Tile::STATIONS {
            prop_assert!((1..=2).contains(&level.count(t)));
        }
    }

    #[test]
    fn env_safety_and_termination(
        seed in any::<u64>(),
        horizon in 1u32..60,
        script in prop::collection::vec((action(), action()), 60),
    ) {
        let env = Env::new(EnvConfig { horizon, ..EnvConfig::default() });
        let mut state = env.reset(level_from(seed), seed).unwrap();
        let mut reward = 0.0;
        for &(a, b) in &script {
            let pure = env.step(&state, [a, b]).unwrap();
            let info = env.step_in_place(&mut state, [a, b]).unwrap();
            prop_assert_eq!(&pure.next_state, &state);
            prop_assert!(state.check_invariants(&env.config).is_ok());
            prop_assert_eq!(info.done, state.t == horizon);
            reward += info.reward;
            if info.done {
                break;
            }
        }
        prop_assert_eq!(reward, 20.0 * state.deliveries as f64);
        if state.t == horizon {
            prop_assert!(env.step_in_place(&mut state, [Action::Stay; 2]).is_err());
        }
    }

    #[test]
    fn mutation_keeps_agents_and_stations(seed in any::<u64>(), n in 0usize..30) {
        let level = level_from(seed);
        let (child, log) = mutate(&level, n, &mut seeded(seed ^ 1), &MutatorConfig::default()).unwrap();
        prop_assert!(child.validate().valid);
        prop_assert_eq!(child.agents(), level.agents());
        prop_assert_eq!(log.ops.len() + log.skipped, n);
        for t in Tile::STATIONS {
            prop_assert_eq!(child.count(t), level.count(t));
        }
    }

    #[test]
    fn teacher_round_trips_generator_levels(seed in any::<u64>(), noise in any::<u64>()) {
        let level = level_from(seed);
        let cfg = TeacherConfig::default();
        let script = script_for_level(&level, &cfg).unwrap();
        prop_assert_eq!(replay_script(&script, noise, &cfg).unwrap(), level);
    }

    #[test]
    fn buffer_capacity_and_uniqueness(
        capacity in 1usize..20,
        inserts in prop::collection::vec((0u64..40, 0.0f64..10.0), 1..200),
    ) {
        let config = PlrConfig { capacity, ..PlrConfig::plr() };
        let levels: Vec<Level> = (0..40).map(level_from).collect();
        let mut buffer = LevelBuffer::new(capacity);
        for (episode, &(which, score)) in inserts.iter().enumerate() {
            let level = &levels[which as usize];
            insert_or_update(&mut buffer, level, score, episode as u64, &config).unwrap();
            prop_assert!(buffer.len() <= capacity);
            let digests: HashSet<_> = buffer.entries().iter().map(|e| e.digest).collect();
            prop_assert_eq!(digests.len(), buffer.len());
            for e in buffer.entries() {
                prop_assert_eq!(e.digest, e.level.digest());
                prop_assert!(e.score.is_finite());
            }
        }
        let probs = replay_distribution(&buffer, &config, inserts.len() as u64);
        prop_assert_eq!(probs.len(), buffer.len());
        prop_assert!(probs.iter().all(|&p| p >= 0.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn regret_scores(returns in prop::collection::vec(-50.0f64..50.0, 2..6),
                     values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
        let regret = relative_regret(&returns).unwrap();
        prop_assert!(regret >= 0.0);

        let mut tracker = ReturnTracker::new();
        let digest = level_from(0).digest();
        let mut best = f64::NEG_INFINITY;
        for &r in &returns {
            let known = tracker.observe(digest, r);
            best = best.max(r);
            prop_assert!(known >= r);
            prop_assert_eq!(known, best);
        }
        let summary = EpisodeSummary {
            digest,
            agent_returns: vec![returns[0]; 2],
            shared_return: returns[0],
            values,
            max_known_return: best,
        };
        prop_assert!(maxmc_score_with(&summary, true).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn greedy_rollouts_are_reproducible(seed in any::<u64>(), env_seed in any::<u64>()) {
        let level = level_from(seed);
        let p = greedy_policy();
        let cfg = HarnessConfig { horizon: 120, ..HarnessConfig::default() };
        let a = rollout(level.clone(), &p, &p, &cfg, env_seed).unwrap();
        let b = rollout(level, &p, &p, &cfg, env_seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.solved, is_solved(a.deliveries, cfg.solved_threshold));
        prop_assert_eq!(a.solved, a.deliveries >= 2);
    }
}
