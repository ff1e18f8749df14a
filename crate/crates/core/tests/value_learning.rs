use marl_lens::nn::{Body, Matrix, ParamStore, TargetUpdate};
use marl_lens::qlearn::{mix_vdn, Episode, QAlgorithm, QLearner, QLearnerConfig, QmixMixer};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(algorithm: QAlgorithm, gamma: f64, batch: usize) -> QLearnerConfig {
    let mut cfg = QLearnerConfig::new(algorithm, true);
    cfg.body = Body::Fc;
    cfg.hidden_dim = 32;
    cfg.lr = 1e-3;
    cfg.gamma = gamma;
    cfg.batch_size = batch;
    cfg.standardize_rewards = false;
    cfg.target_update = TargetUpdate::Hard { interval: 10 };
    cfg
}

const CHAIN: usize = 5;
const GOAL: usize = CHAIN - 1;

fn one_hot(s: usize) -> Vec<f32> {
    let mut v = vec![0.0; CHAIN];
    v[s] = 1.0;
    v
}

/// Action 0 steps left (bumping the wall at 0 pays 0.1), action 1 steps right;
/// entering the last state pays 1 and ends the episode.
fn chain_step(s: usize, a: usize) -> (usize, f64) {
    match (s, a) {
        (0, 0) => (0, 0.1),
        (_, 0) => (s - 1, 0.0),
        _ if s + 1 == GOAL => (GOAL, 1.0),
        _ => (s + 1, 0.0),
    }
}

fn value_iteration(gamma: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; GOAL];
    for _ in 0..10_000 {
        let prev = q.clone();
        for (s, qs) in q.iter_mut().enumerate() {
            for (a, v) in qs.iter_mut().enumerate() {
                let (next, r) = chain_step(s, a);
                *v = r + if next == GOAL { 0.0 } else { gamma * prev[next][0].max(prev[next][1]) };
            }
        }
    }
    q
}

#[test]
fn iql_matches_value_iteration_on_a_chain() {
    let gamma = 0.9;
    let oracle = value_iteration(gamma);
    let episodes: Vec<Episode> = (0..GOAL)
        .flat_map(|s| [0, 1].map(move |a| (s, a)))
        .map(|(s, a)| {
            let (next, r) = chain_step(s, a);
            let mut e = Episode::new(1, CHAIN, &[one_hot(s)]);
            e.push(vec![a], r as f32, &[one_hot(next)]);
            e.terminated = next == GOAL;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut learner = QLearner::new(config(QAlgorithm::Iql, gamma, episodes.len()), 1, CHAIN, 2, &mut rng).unwrap();
    for step in 0..6000 {
        learner.train_on_episodes(&episodes, 0.1, step).unwrap();
    }
    for (s, want) in oracle.iter().enumerate() {
        let q = learner.q_values(&[one_hot(s)], &mut None).unwrap();
        for a in 0..2 {
            assert!((q[0][a] - want[a]).abs() < 1e-2, "Q({s},{a}) = {} vs {}", q[0][a], want[a]);
        }
    }
}

#[test]
fn vdn_recovers_an_additive_matrix_game() {
    let u = [0.0, 1.0, 0.3];
    let v = [0.5, 0.0, 0.2];
    let obs = vec![vec![1.0f32], vec![1.0]];
    let episodes: Vec<Episode> = (0..3)
        .flat_map(|a| (0..3).map(move |b| (a, b)))
        .map(|(a, b)| {
            let mut e = Episode::new(2, 1, &obs);
            e.push(vec![a, b], (u[a] + v[b]) as f32, &obs);
            e.terminated = true;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut learner = QLearner::new(config(QAlgorithm::Vdn, 0.99, 9), 2, 1, 3, &mut rng).unwrap();
    for step in 0..3000 {
        learner.train_on_episodes(&episodes, 0.1, step).unwrap();
    }
    let q = learner.q_values(&obs, &mut None).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let joint = mix_vdn(&[q[0][a], q[1][b]]);
            assert!((joint - (u[a] + v[b])).abs() < 1e-2, "Q({a},{b}) = {joint}");
        }
    }
    assert_eq!(marl_lens::diagnostics::argmax(&q[0]), 1);
    assert_eq!(marl_lens::diagnostics::argmax(&q[1]), 0);
}

#[test]
fn qmix_fits_a_monotone_game_that_vdn_cannot() {
    // Reward 1 only when both agents pick action 1: monotone in each agent's
    // value but not a sum.
    let obs = vec![vec![1.0f32], vec![1.0]];
    let episodes: Vec<Episode> = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| {
            let mut e = Episode::new(2, 1, &obs);
            e.push(vec![a, b], if a == 1 && b == 1 { 1.0 } else { 0.0 }, &obs);
            e.terminated = true;
            e
        })
        .collect();
    let loss_after = |alg| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cfg = config(alg, 0.99, 4);
        cfg.mixing_embed_dim = 8;
        cfg.hypernet_dim = 16;
        let mut learner = QLearner::new(cfg, 2, 1, 2, &mut rng).unwrap();
        for step in 0..3000 {
            learner.train_on_episodes(&episodes, 0.1, step).unwrap();
        }
        let refs: Vec<&Episode> = episodes.iter().collect();
        learner.batch_loss(&refs).unwrap()
    };
    let vdn = loss_after(QAlgorithm::Vdn);
    let qmix = loss_after(QAlgorithm::Qmix);
    // The best additive fit of this game has mean squared error 1/16.
    assert!((vdn - 1.0 / 16.0).abs() < 5e-3, "vdn loss {vdn}");
    assert!(qmix < 1e-2, "qmix loss {qmix}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qmix_is_monotone_in_every_agent(
        seed in any::<u64>(),
        n in 2usize..=4,
        qs in prop::collection::vec(-20.0f64..20.0, 4),
        state in prop::collection::vec(-3.0f64..3.0, 6),
        agent in 0usize..4,
        bump in 1e-3f64..5.0,
    ) {
        let agent = agent % n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::<f64>::new();
        let mixer = QmixMixer::new(&mut store, "m", n, 6, 8, 16, &mut rng);
        let s = Matrix::from_vec(1, 6, state);
        let base = Matrix::from_vec(1, n, qs[..n].to_vec());
        let mut up = base.clone();
        up.data[agent] += bump;
        let a = mixer.mix_values(&store, &base, &s).unwrap().data[0];
        let b = mixer.mix_values(&store, &up, &s).unwrap().data[0];
        prop_assert!(b >= a, "{} < {}", b, a);
    }

    #[test]
    fn vdn_mix_is_the_sum(qs in prop::collection::vec(-1000i32..1000, 1..8)) {
        let v: Vec<f64> = qs.iter().map(|&q| q as f64 / 4.0).collect();
        prop_assert_eq!(mix_vdn(&v), qs.iter().sum::<i32>() as f64 / 4.0);
    }
}
