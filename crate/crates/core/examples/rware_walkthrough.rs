use marl_lens::env::rware::{RwareAction, RwareEnv};
use marl_lens::scenario::parse_scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let scenario = parse_scenario("rware-tiny-2ag-v1").unwrap();
    let mut env = RwareEnv::new(&scenario, 500).unwrap();
    let obs = env.reset(7).unwrap();
    println!("{} agents, observation width {}", env.n_agents(), obs[0].len());
    println!("requested shelves: {:?}", env.state().request_queue);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut delivered = 0.0;
    let mut lifted = 0;
    loop {
        // Mostly move forward, sometimes turn or toggle a load.
        let actions: Vec<usize> = (0..env.n_agents())
            .map(|_| match rng.gen_range(0..10) {
                0..=5 => RwareAction::Forward as usize,
                6 => RwareAction::TurnLeft as usize,
                7 => RwareAction::TurnRight as usize,
                _ => RwareAction::ToggleLoad as usize,
            })
            .collect();
        let step = env.step(&actions).unwrap();
        delivered += step.team_reward;
        lifted = lifted.max(env.state().agents.iter().filter(|a| a.carrying.is_some()).count());
        if step.done {
            break;
        }
    }
    let s = env.state();
    println!("after {} steps: team reward {delivered}, at most {lifted} shelves carried at once", s.step_count);
    println!("requested shelves: {:?}", s.request_queue);
    assert_eq!(s.request_queue.len(), env.n_agents());
}
