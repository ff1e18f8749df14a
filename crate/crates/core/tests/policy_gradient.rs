mod common;

use marl_lens::nn::{Graph, Matrix, ParamStore};
use marl_lens::pg::{n_step_returns, pg_losses};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn unclipped_single_epoch_ppo_is_a2c(seed in any::<u64>(), recurrent in any::<bool>()) {
        let (gap, scale) = common::ppo_a2c_gradient_gap(seed, recurrent).unwrap();
        prop_assert!(scale > 0.0);
        prop_assert!(gap <= 1e-6, "gap {}", gap);
    }
}

/// Direct recursion on the definition, one target at a time.
fn returns_oracle(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..rewards.len() {
        let end = (t + n).min(rewards.len());
        let stop = (t..end).find(|&k| dones[k]);
        let last = stop.map_or(end, |k| k + 1);
        let mut g: f64 = (t..last).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
        if stop.is_none() {
            g += gamma.powi((end - t) as i32) * values[end];
        }
        out.push(g);
    }
    out
}

fn entropy_at(logits: Vec<f64>, cols: usize) -> f64 {
    let rows = logits.len() / cols;
    let mut s = ParamStore::new();
    let l = s.add("l", Matrix::from_vec(rows, cols, logits));
    let v = s.add("v", Matrix::zeros(rows, 1));
    let mut g = Graph::new(&s);
    let (ln, vn) = (g.param(l), g.param(v));
    let zeros = vec![0.0; rows];
    let parts = pg_losses(&mut g, ln, &vec![0; rows], &zeros, vn, &zeros, None, 0.01).unwrap();
    g.scalar(parts.entropy)
}

proptest! {
    #[test]
    fn n_step_returns_follow_the_definition(
        steps in prop::collection::vec((-1.0f64..1.0, -2.0f64..2.0, prop::bool::weighted(0.2)), 1..12),
        last in -2.0f64..2.0,
        gamma in 0.0f64..=1.0,
        n in 1usize..8,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let mut values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        values.push(last);
        let dones: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let got = n_step_returns(&rewards, &values, &dones, gamma, n);
        let want = returns_oracle(&rewards, &values, &dones, gamma, n);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn entropy_bonus_peaks_at_uniform(logits in prop::collection::vec(-4.0f64..4.0, 6)) {
        let uniform = entropy_at(vec![0.0; 6], 6);
        prop_assert!((uniform - 6f64.ln()).abs() < 1e-12);
        prop_assert!(entropy_at(logits, 6) <= uniform + 1e-12);
    }

    #[test]
    fn losses_are_detached_from_each_other(
        logits in prop::collection::vec(-3.0f64..3.0, 8),
        adv in prop::collection::vec(-2.0f64..2.0, 2),
        ret in prop::collection::vec(-2.0f64..2.0, 2),
        values in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let mut s = ParamStore::new();
        let l = s.add("l", Matrix::from_vec(2, 4, logits));
        let v = s.add("v", Matrix::from_vec(2, 1, values));
        let mut g = Graph::new(&s);
        let (ln, vn) = (g.param(l), g.param(v));
        let parts = pg_losses(&mut g, ln, &[1, 3], &adv, vn, &ret, None, 0.01).unwrap();
        let policy = g.backward(parts.policy);
        prop_assert!(policy.get(v).data.iter().all(|&x| x == 0.0));
        let value = g.backward(parts.value);
        prop_assert!(value.get(l).data.iter().all(|&x| x == 0.0));
        let entropy = g.backward(parts.entropy);
        prop_assert!(entropy.get(v).data.iter().all(|&x| x == 0.0));
    }
}
