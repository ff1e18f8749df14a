use marl_lens::diagnostics::{
    epsilon_greedy_probs, extract_policy, policy_entropy, softmax, task_switch_profile, update_divergence,
    LearnerKind, TaskSwitchMode,
};

fn show(p: &[f64]) -> String {
    p.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    println!("policy entropy");
    let uniform = [1.0 / 6.0; 6];
    println!("  uniform over 6    {:.4} (ln 6 = {:.4})", policy_entropy(&uniform), 6f64.ln());
    let peaked = softmax(&[4.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    println!("  peaked softmax    {:.4}", policy_entropy(&peaked));
    for eps in [1.0, 0.5, 0.05] {
        let p = epsilon_greedy_probs(&[0.1, 0.9, 0.2, 0.0, 0.3, 0.4], eps);
        println!("  epsilon {eps:<4}      {:.4}  [{}]", policy_entropy(&p), show(&p));
    }

    println!("update divergence");
    let before = softmax(&[0.0, 0.0, 0.0]);
    for shift in [0.0, 0.5, 2.0, 8.0] {
        let after = softmax(&[shift, 0.0, 0.0]);
        println!("  shift {shift:<4} KL {:.6}", update_divergence(&after, &before).unwrap());
    }

    println!("per-agent policies from network outputs");
    let outputs = vec![vec![2.0, 0.1, -1.0], vec![0.0, 0.0, 0.0]];
    let pg = extract_policy(LearnerKind::PolicyGradient, &outputs);
    let q = extract_policy(LearnerKind::ValueBased { epsilon: 0.1 }, &outputs);
    for i in 0..2 {
        println!("  agent {i}: softmax [{}]  epsilon-greedy [{}]", show(&pg.probs[i]), show(&q.probs[i]));
    }

    println!("task switching");
    // Agent 0 mostly loads; agent 1 wanders.
    let log = vec![vec![5, 5, 5, 1, 5, 5, 2, 5], vec![1, 2, 3, 4, 1, 2, 3, 4]];
    for mode in [TaskSwitchMode::PaperExact, TaskSwitchMode::FrequencyNormalized] {
        let p = task_switch_profile(&log, 6, mode).unwrap();
        println!("  {mode:?}");
        for (i, l) in p.likelihood.iter().enumerate() {
            println!("    agent {i} counts {:?} likelihood [{}]", p.counts[i], show(l));
        }
    }
}
