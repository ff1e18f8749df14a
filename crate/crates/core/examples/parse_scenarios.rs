use marl_lens::env::Env;
use marl_lens::scenario::{parse_scenario, render_scenario, EnvKind, CATALOG};

fn main() {
    println!("{:<32} {:>6} {:>7} {:>7} {:>8}", "scenario", "agents", "actions", "obs", "horizon");
    for name in CATALOG {
        let s = parse_scenario(name).expect("catalog names parse");
        assert_eq!(render_scenario(&s), name);
        let env = Env::new(&s, None).expect("catalog scenarios build");
        let kind = match s.env_kind {
            EnvKind::Lbf => "lbf",
            EnvKind::Rware => "rware",
        };
        println!(
            "{:<32} {:>6} {:>7} {:>7} {:>8}  {kind}",
            name,
            env.n_agents(),
            env.n_actions(),
            env.obs_dim(),
            env.horizon()
        );
    }

    for bad in ["Foraging-8x8-2p", "rware-huge-2ag-v1", "Foraging-2s-8x8-0p-2f-v2"] {
        match parse_scenario(bad) {
            Ok(s) => println!("{bad}: unexpectedly parsed as {}", render_scenario(&s)),
            Err(e) => println!("{bad}: {e}"),
        }
    }
}
