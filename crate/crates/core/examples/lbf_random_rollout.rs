//! Plays uniformly random joint actions in a foraging scenario and reports
//! how rarely the cooperative food gets collected by chance.
//!
//! `cargo run --release --example lbf_random_rollout -- Foraging-8x8-2p-2f-coop-v2 500`

use marl_lens::env::lbf::LbfEnv;
use marl_lens::env::LBF_HORIZON;
use marl_lens::scenario::parse_scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "Foraging-8x8-2p-2f-coop-v2".into());
    let episodes: u64 = args.next().map_or(500, |s| s.parse().expect("episode count"));

    let scenario = parse_scenario(&name).expect("scenario name");
    let mut env = LbfEnv::new(&scenario, LBF_HORIZON).expect("foraging scenario");
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    env.reset(0).unwrap();
    let s = env.state();
    for a in &s.agents {
        println!("agent at ({}, {}) level {}", a.pos.x, a.pos.y, a.level);
    }
    for f in &s.foods {
        println!("food  at ({}, {}) level {}", f.pos.x, f.pos.y, f.level);
    }

    let mut total = 0.0;
    let mut rewarded = 0;
    for ep in 0..episodes {
        env.reset(ep).unwrap();
        let mut ret = 0.0;
        loop {
            let actions: Vec<usize> = (0..env.n_agents()).map(|_| rng.gen_range(0..6)).collect();
            let step = env.step(&actions).unwrap();
            ret += step.team_reward as f64;
            assert!(env.check_invariants());
            if step.done {
                break;
            }
        }
        total += ret;
        rewarded += (ret > 0.0) as u32;
    }
    println!("{episodes} episodes: mean team return {:.4}, {rewarded} with any reward", total / episodes as f64);
}
