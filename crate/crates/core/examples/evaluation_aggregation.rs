use marl_lens::eval_stats::{
    final_score, mean_and_ci, minmax_normalize, probability_of_improvement, sample_efficiency_curve, ScoreMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A noisy saturating learning curve.
fn curve(rate: f64, ceiling: f64, points: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..points)
        .map(|p| ceiling * (1.0 - (-rate * p as f64).exp()) + rng.gen_range(-0.05..0.05))
        .collect()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let points = 201;
    let steps: Vec<u64> = (0..points as u64).map(|p| p * 10_000).collect();
    let tasks = ["easy", "hard"];
    // [algorithm][task][seed][point]
    let algorithms = [("fast", [0.05, 0.01]), ("slow", [0.02, 0.004])];
    let ceilings = [1.0, 0.6];
    let runs: Vec<Vec<Vec<Vec<f64>>>> = algorithms
        .iter()
        .map(|(_, rates)| {
            rates
                .iter()
                .zip(ceilings)
                .map(|(&r, c)| (0..5).map(|_| curve(r, c, points, &mut rng)).collect())
                .collect()
        })
        .collect();

    let scores = ScoreMatrix {
        algorithms: algorithms.iter().map(|(n, _)| n.to_string()).collect(),
        tasks: tasks.iter().map(|t| t.to_string()).collect(),
        scores: runs
            .iter()
            .map(|alg| alg.iter().map(|task| task.iter().map(|r| final_score(r).unwrap()).collect()).collect())
            .collect(),
    };
    for (a, name) in scores.algorithms.iter().enumerate() {
        for (k, task) in tasks.iter().enumerate() {
            let ci = mean_and_ci(&scores.scores[a][k], 0.95).unwrap();
            println!("{name:<5} {task:<5} final {:.3} [{:.3}, {:.3}]", ci.mean, ci.lo, ci.hi);
        }
    }

    let norm = scores.normalized();
    let p = norm.probability_of_improvement("fast", "slow").unwrap();
    println!("P(fast > slow) = {p:.3}, P(slow > fast) = {:.3}", norm.probability_of_improvement("slow", "fast").unwrap());
    println!("identical sets: {}", probability_of_improvement(&[vec![0.2, 0.4]], &[vec![0.2, 0.4]]).unwrap());
    println!("minmax of [0, 5, 10]: {:?}", minmax_normalize(&[0.0, 5.0, 10.0]));

    for (a, (name, _)) in algorithms.iter().enumerate() {
        let curve = sample_efficiency_curve(&steps, &runs[a], Some(&[(0.0, 1.0), (0.0, 0.6)]), 0.95).unwrap();
        print!("{name:<5} normalised curve:");
        for pt in curve.iter().step_by(40) {
            print!(" {}:{:.2}", pt.step, pt.mean);
        }
        println!();
    }
}
