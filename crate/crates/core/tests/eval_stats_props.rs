use marl_lens::eval_stats::{
    curve_with_ci, final_score, mean_and_ci, minmax_normalize, probability_of_improvement, sample_efficiency_curve,
    ScoreMatrix,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Scores on a coarse grid so ties are frequent.
fn scores() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5, 1usize..8).prop_flat_map(|(tasks, seeds)| {
        prop::collection::vec(prop::collection::vec((0i32..6).prop_map(|v| v as f64 / 5.0), seeds), tasks)
    })
}

/// Pairwise count over every `(x, y)`: the definition, one pair at a time.
fn poi_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (a, b) in x.iter().zip(y) {
        let mut wins = 0.0;
        for p in a {
            for q in b {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        total += wins / (a.len() * b.len()) as f64;
    }
    total / x.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn improvement_is_exactly_antisymmetric((x, y) in scores().prop_flat_map(|x| {
        let tasks = x.len();
        (Just(x), prop::collection::vec(prop::collection::vec((0i32..6).prop_map(|v| v as f64 / 5.0), 1..8), tasks))
    })) {
        let a = probability_of_improvement(&x, &y).unwrap();
        let b = probability_of_improvement(&y, &x).unwrap();
        prop_assert_eq!(a + b, 1.0);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - poi_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn improvement_against_itself_is_a_half(x in scores()) {
        prop_assert_eq!(probability_of_improvement(&x, &x).unwrap(), 0.5);
    }

    #[test]
    fn minmax_preserves_order_and_range(v in prop::collection::vec(-1e6f64..1e6, 1..30)) {
        let n = minmax_normalize(&v);
        for i in 0..v.len() {
            prop_assert!((0.0..=1.0).contains(&n[i]));
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(n[i] <= n[j]);
                }
            }
        }
    }

    #[test]
    fn interval_brackets_the_mean(v in prop::collection::vec(-100.0f64..100.0, 1..20)) {
        let ci = mean_and_ci(&v, 0.95).unwrap();
        prop_assert!(ci.lo <= ci.mean && ci.mean <= ci.hi);
        prop_assert!(((ci.mean - ci.lo) - (ci.hi - ci.mean)).abs() < 1e-9);
    }

    #[test]
    fn curve_ignores_task_order(seed in any::<u64>(), tasks in 1usize..6, seeds in 1usize..5, points in 1usize..20) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps: Vec<u64> = (0..points as u64).map(|p| p * 100).collect();
        let data: Vec<Vec<Vec<f64>>> = (0..tasks)
            .map(|_| (0..seeds).map(|_| (0..points).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect())
            .collect();
        let base = sample_efficiency_curve(&steps, &data, None, 0.95).unwrap();
        let mut order: Vec<usize> = (0..tasks).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<_> = order.iter().map(|&k| data[k].clone()).collect();
        let again = sample_efficiency_curve(&steps, &shuffled, None, 0.95).unwrap();
        for (a, b) in base.iter().zip(&again) {
            prop_assert_eq!(a.step, b.step);
            prop_assert!((a.mean - b.mean).abs() < 1e-12);
            prop_assert!((a.ci_lo - b.ci_lo).abs() < 1e-12);
            prop_assert!((a.ci_hi - b.ci_hi).abs() < 1e-12);
        }
    }
}

#[test]
fn improvement_on_ten_thousand_random_sets() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let tasks = rng.gen_range(1..6);
        let (nx, ny) = (rng.gen_range(1..11), rng.gen_range(1..11));
        let x: Vec<Vec<f64>> = (0..tasks).map(|_| (0..nx).map(|_| rng.gen()).collect()).collect();
        let y: Vec<Vec<f64>> = (0..tasks).map(|_| (0..ny).map(|_| rng.gen()).collect()).collect();
        assert_eq!(probability_of_improvement(&x, &y).unwrap() + probability_of_improvement(&y, &x).unwrap(), 1.0);
    }
}

#[test]
fn improvement_examples() {
    let poi = |x: &[f64], y: &[f64]| probability_of_improvement(&[x.to_vec()], &[y.to_vec()]).unwrap();
    assert_eq!(poi(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]), 1.0);
    assert_eq!(poi(&[0.2, 0.9], &[0.2, 0.9]), 0.5);
    // Pairs (1,2) (1,2) lose, (3,2) (3,2) win.
    assert_eq!(poi(&[1.0, 3.0], &[2.0, 2.0]), 0.5);
    assert!(probability_of_improvement(&[vec![1.0]], &[]).is_err());
}

#[test]
fn two_sample_interval_uses_the_t_table() {
    let ci = mean_and_ci(&[0.0, 2.0], 0.95).unwrap();
    // t(0.975, 1) = 12.706; s = sqrt(2), n = 2.
    assert_eq!(ci.mean, 1.0);
    assert!((ci.hi - ci.mean - 12.706).abs() < 1e-3);
    assert_eq!(mean_and_ci(&[1.0, 1.0, 1.0], 0.95).unwrap().hi, 1.0);
}

#[test]
fn linear_growth_reproduces_the_line() {
    let points = 201;
    let steps: Vec<u64> = (0..points as u64).map(|p| p * 5000).collect();
    let slopes = [(0.0, 1.0), (-3.0, 0.25), (10.0, 7.5)];
    let offsets = [-0.5, 0.0, 0.5];
    let tasks: Vec<Vec<Vec<f64>>> = slopes
        .iter()
        .map(|&(a, b)| {
            offsets
                .iter()
                .map(|&c| (0..points).map(|p| a + b * (p as f64 + c)).collect())
                .collect()
        })
        .collect();
    let bounds: Vec<(f64, f64)> = slopes.iter().map(|&(a, b)| (a, a + b * (points - 1) as f64)).collect();
    let curve = sample_efficiency_curve(&steps, &tasks, Some(&bounds), 0.95).unwrap();
    assert_eq!(curve.len(), points);
    for (p, pt) in curve.iter().enumerate() {
        let want = p as f64 / (points - 1) as f64;
        assert!((pt.mean - want).abs() < 1e-9, "point {p}: {}", pt.mean);
    }
}

#[test]
fn single_seed_and_identical_seeds_collapse() {
    let steps = [0, 10, 20];
    let one = curve_with_ci(&steps, &[vec![0.1, 0.4, 0.3]], 0.95).unwrap();
    assert!(one.iter().all(|p| p.ci_lo == p.mean && p.ci_hi == p.mean));
    let two = curve_with_ci(&steps, &[vec![0.1, 0.4, 0.3], vec![0.1, 0.4, 0.3]], 0.95).unwrap();
    assert!(two.iter().all(|p| p.ci_lo == p.mean && p.ci_hi == p.mean));
}

#[test]
fn final_score_averages_the_last_ten_points() {
    let curve: Vec<f64> = (0..201).map(|p| p as f64).collect();
    assert_eq!(final_score(&curve).unwrap(), (191..201).sum::<i32>() as f64 / 10.0);
}

#[test]
fn score_matrix_normalises_per_task() {
    let m = ScoreMatrix {
        algorithms: vec!["a".into(), "b".into()],
        tasks: vec!["t1".into(), "t2".into()],
        scores: vec![vec![vec![0.0, 10.0], vec![1.0, 1.0]], vec![vec![5.0, 5.0], vec![3.0, 2.0]]],
    };
    let n = m.normalized();
    assert_eq!(n.scores[0][0], vec![0.0, 1.0]);
    assert_eq!(n.scores[1][0], vec![0.5, 0.5]);
    assert_eq!(n.scores[0][1], vec![0.0, 0.0]);
    assert_eq!(n.scores[1][1], vec![1.0, 0.5]);
    let p = n.probability_of_improvement("a", "b").unwrap();
    assert_eq!(p + n.probability_of_improvement("b", "a").unwrap(), 1.0);
    assert!((p - poi_oracle(&n.scores[0], &n.scores[1])).abs() < 1e-12);
}
