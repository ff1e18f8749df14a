//! Trains IQL with shared parameters on the cooperative 8x8 foraging task and
//! prints the diagnostics report next to the random-policy baseline.
//!
//! `cargo run --release --example train_iql_foraging -- 200000`

use marl_lens::runner::{diagnose, random_baseline, run_experiment, ExperimentConfig};

fn main() -> anyhow::Result<()> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(50_000), |s| s.parse())?;
    let out = std::env::temp_dir().join("marl-lens-examples");

    let mut cfg = ExperimentConfig::new("Foraging-8x8-2p-2f-coop-v2", "iql", true, steps);
    cfg.hyperparams.epsilon_decay_steps = Some(steps / 4);
    cfg.experiment.out_dir = out;
    println!("{}", cfg.to_toml());

    let dir = run_experiment(&cfg)?;
    println!("run written to {}", dir.display());
    let report = diagnose(&dir)?;
    print!("{report}");

    let baseline = random_baseline(&cfg.scenario()?, None, 1000, 0)?;
    println!("random policy return {baseline:.4}");
    if baseline > 0.0 {
        println!("final score is {:.1}x the random policy", report.final_score / baseline);
    }
    Ok(())
}
