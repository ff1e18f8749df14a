//! Short MAPPO and MAA2C runs on the same task, compared by probability of
//! improvement over their final scores.

use std::path::PathBuf;

use marl_lens::runner::{export, run_experiment, ExperimentConfig, ExportMetric, RunData};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("marl-lens-examples");
    let steps: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let mut runs: Vec<PathBuf> = Vec::new();
    for alg in ["mappo", "maa2c"] {
        for seed in 0..3 {
            let mut cfg = ExperimentConfig::new("Foraging-5x5-2p-1f-coop-v2", alg, true, steps);
            cfg.experiment.seed = seed;
            cfg.experiment.n_eval_points = 21;
            cfg.experiment.out_dir = out.clone();
            cfg.hyperparams.hidden_dim = Some(64);
            let dir = run_experiment(&cfg)?;
            let data = RunData::load(&dir)?;
            println!("{alg:<6} seed {seed}: final score {:.4}", data.final_score()?);
            runs.push(dir);
        }
    }

    println!("\nprobability of improvement");
    export(&runs, ExportMetric::Poi, std::io::stdout())?;

    println!("\nMAPPO return curve (mean and 95% interval over seeds)");
    export(&runs[..3], ExportMetric::Returns, std::io::stdout())?;
    Ok(())
}
