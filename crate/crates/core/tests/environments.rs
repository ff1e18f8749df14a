use marl_lens::env::lbf::{Agent, Food, LbfAction, LbfEnv};
use marl_lens::env::rware::RwareEnv;
use marl_lens::env::{Env, Pos};
use marl_lens::scenario::parse_scenario;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lbf(name: &str) -> LbfEnv {
    LbfEnv::new(&parse_scenario(name).unwrap(), 50).unwrap()
}

fn rware(name: &str, horizon: u32) -> RwareEnv {
    RwareEnv::new(&parse_scenario(name).unwrap(), horizon).unwrap()
}

const NEIGHBOURS: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// Places one coop food in the middle of a 5x5 grid with agents on some of its
/// neighbours, then lets a chosen subset load.
fn pickup_case(levels: &[u32], loaders: &[bool]) -> (bool, f32) {
    let mut env = lbf(&format!("Foraging-5x5-{}p-1f-coop-v2", levels.len()));
    env.reset(0).unwrap();
    let mut s = env.state().clone();
    let centre = Pos::new(2, 2);
    s.agents = levels
        .iter()
        .zip(NEIGHBOURS)
        .map(|(&level, (dx, dy))| Agent { pos: centre.offset(dx, dy, 5, 5).unwrap(), level })
        .collect();
    s.foods = vec![Food { pos: centre, level: levels.iter().sum(), present: true }];
    env.set_state(s);
    let actions: Vec<usize> = loaders.iter().map(|&l| if l { LbfAction::Load as usize } else { LbfAction::Noop as usize }).collect();
    let step = env.step(&actions).unwrap();
    (!env.state().foods[0].present, step.team_reward)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn coop_food_needs_every_agent(
        levels in prop::collection::vec(1u32..=3, 2..=4),
        mask in prop::collection::vec(any::<bool>(), 4),
    ) {
        let loaders = &mask[..levels.len()];
        let (collected, reward) = pickup_case(&levels, loaders);
        let all = loaders.iter().all(|&l| l);
        prop_assert_eq!(collected, all);
        if all {
            prop_assert!((reward - 1.0).abs() < 1e-6);
        } else {
            prop_assert_eq!(reward, 0.0);
        }
    }

    #[test]
    fn coop_collection_on_random_trajectories(seed in any::<u64>(), agents in 2u32..=3) {
        let mut env = lbf(&format!("Foraging-6x6-{agents}p-2f-coop-v2"));
        env.reset(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0f32;
        loop {
            let before = env.state().clone();
            // Load often so that pickups actually happen.
            let actions: Vec<usize> = (0..agents).map(|_| if rng.gen_bool(0.5) { 5 } else { rng.gen_range(0..5) }).collect();
            let step = env.step(&actions).unwrap();
            let after = env.state();
            prop_assert!(env.check_invariants());
            for (f, (old, new)) in before.foods.iter().zip(&after.foods).enumerate() {
                if old.present && !new.present {
                    for (i, a) in after.agents.iter().enumerate() {
                        prop_assert_eq!(actions[i], 5, "food {} taken without agent {}", f, i);
                        prop_assert_eq!(a.pos.manhattan(new.pos), 1);
                    }
                }
            }
            for (a, b) in before.agents.iter().zip(&after.agents) {
                prop_assert!(a.pos.manhattan(b.pos) <= 1);
            }
            total += step.team_reward;
            if step.done {
                break;
            }
        }
        prop_assert!(total <= 1.0 + 1e-5);
    }

    #[test]
    fn warehouse_request_queue_is_conserved(seed in any::<u64>(), which in 0usize..3) {
        let name = ["rware-tiny-2ag-v1", "rware-tiny-4ag-v1", "rware-small-4ag-v1"][which];
        let mut env = rware(name, 200);
        env.reset(seed).unwrap();
        let n = env.n_agents();
        let n_shelves = env.state().shelves.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let mut deliveries = 0.0;
        loop {
            let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let step = env.step(&actions).unwrap();
            let s = env.state();
            prop_assert_eq!(s.request_queue.len(), n);
            let mut q = s.request_queue.clone();
            q.sort_unstable();
            q.dedup();
            prop_assert_eq!(q.len(), n);
            prop_assert_eq!(s.shelves.iter().filter(|sh| sh.requested).count(), n);
            prop_assert_eq!(s.shelves.len(), n_shelves);
            let mut carried: Vec<usize> = s.agents.iter().filter_map(|a| a.carrying).collect();
            let k = carried.len();
            carried.sort_unstable();
            carried.dedup();
            prop_assert_eq!(carried.len(), k);
            let mut cells: Vec<(u32, u32)> = s.agents.iter().map(|a| (a.pos.x, a.pos.y)).collect();
            cells.sort_unstable();
            cells.dedup();
            prop_assert_eq!(cells.len(), n);
            prop_assert!(step.rewards.iter().all(|&r| r == step.team_reward));
            deliveries += step.rewards[0];
            if step.done {
                break;
            }
        }
        prop_assert!(deliveries >= 0.0);
    }
}

/// Plays 1000 steps with seeded random actions, resetting on episode end,
/// and records every state snapshot.
fn trajectory(name: &str, seed: u64) -> Vec<String> {
    let sc = parse_scenario(name).unwrap();
    let mut env = Env::new(&sc, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episode = 0u64;
    env.reset(seed).unwrap();
    let mut out = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let actions: Vec<usize> = (0..env.n_agents()).map(|_| rng.gen_range(0..env.n_actions())).collect();
        let step = env.step(&actions).unwrap();
        out.push(env.snapshot());
        if step.done {
            episode += 1;
            env.reset(seed.wrapping_add(episode)).unwrap();
        }
    }
    out
}

#[test]
fn seeded_trajectories_are_byte_identical() {
    for name in ["Foraging-8x8-2p-2f-coop-v2", "Foraging-2s-10x10-3p-3f-v2", "rware-tiny-4ag-v1", "rware-small-4ag-v1"] {
        let a = trajectory(name, 42);
        assert_eq!(a, trajectory(name, 42), "{name}");
        assert_ne!(a, trajectory(name, 43), "{name}");
    }
}

#[test]
fn coop_food_levels_equal_agent_level_sum() {
    let mut env = lbf("Foraging-8x8-2p-2f-coop-v2");
    for seed in 0..200 {
        env.reset(seed).unwrap();
        let s = env.state();
        let sum: u32 = s.agents.iter().map(|a| a.level).sum();
        assert!(s.foods.iter().all(|f| f.level == sum));
        assert!(env.check_invariants());
    }
}

#[test]
fn reward_splits_by_level() {
    // Levels 1 and 2 share a level-3 food; a second food of level 3 stays on the grid.
    let mut env = lbf("Foraging-5x5-2p-2f-v2");
    env.reset(0).unwrap();
    let mut s = env.state().clone();
    s.agents = vec![Agent { pos: Pos::new(1, 2), level: 1 }, Agent { pos: Pos::new(3, 2), level: 2 }];
    s.foods = vec![
        Food { pos: Pos::new(2, 2), level: 3, present: true },
        Food { pos: Pos::new(0, 0), level: 3, present: true },
    ];
    env.set_state(s);
    let step = env.step(&[5, 5]).unwrap();
    // r_i = level_f * level_i / (loader levels * total food)
    let oracle = [3.0 * 1.0 / (3.0 * 6.0), 3.0 * 2.0 / (3.0 * 6.0)];
    assert!((step.rewards[0] - oracle[0]).abs() < 1e-6);
    assert!((step.rewards[1] - oracle[1]).abs() < 1e-6);
    assert!((step.team_reward - 0.5).abs() < 1e-6);
}

#[test]
fn warehouse_noop_episode_returns_nothing() {
    let mut env = rware("rware-tiny-2ag-v1", 500);
    env.reset(3).unwrap();
    let start = env.state().clone();
    let mut total = 0.0;
    loop {
        let s = env.step(&[0, 0]).unwrap();
        total += s.team_reward;
        if s.done {
            break;
        }
    }
    assert_eq!(total, 0.0);
    assert_eq!(env.state().agents, start.agents);
    assert_eq!(env.state().step_count, 500);
}
