#![allow(dead_code)]

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use marl_lens::diagnostics::{policy_entropy, task_switch_profile, update_divergence, TaskSwitchMode};
use marl_lens::env::lbf::{Agent, Food, LbfAction, LbfEnv};
use marl_lens::env::rware::RwareEnv;
use marl_lens::env::{Env, Pos};
use marl_lens::eval_stats::probability_of_improvement;
use marl_lens::nn::{Graph, Matrix, Net, NetSpec, ParamStore, HIDDEN_GAIN};
use marl_lens::pg::{PgAlgorithm, PgConfig, PgLearner, RolloutWorkers};
use marl_lens::qlearn::{mix_vdn, QmixMixer};
use marl_lens::runner::{
    diagnose, early_late, entropy_curves, export, random_baseline, read_metrics, run_experiment, write_metrics,
    ExperimentConfig, ExportMetric, MetricsEvent, MetricsHeader, RunData, RunInfo,
};
use marl_lens::scenario::{parse_scenario, render_scenario, CATALOG};
use marl_lens::diagnostics::{DiagnosticsRecord, TaskSwitchProfile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{what} took {:.2}s, limit {:.0}s", t.as_secs_f64(), limit.as_secs_f64()));
    }
    Ok(())
}

/// Random distribution over `n` actions; some entries are exactly zero.
pub fn random_distribution<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen::<f64>().powi(3) })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        p[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub fn criterion_1() -> Check {
    let start = Instant::now();
    let h = policy_entropy(&[1.0 / 6.0; 6]);
    if (h - 6f64.ln()).abs() > 1e-9 {
        return Err(format!("entropy of uniform over 6 is {h}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let n = rng.gen_range(2..=8);
        let p = random_distribution(n, &mut rng);
        let q = random_distribution(n, &mut rng);
        let self_kl = update_divergence(&p, &p).map_err(|e| e.to_string())?;
        if self_kl != 0.0 {
            return Err(format!("self divergence {self_kl} for {p:?}"));
        }
        worst = worst.min(update_divergence(&p, &q).map_err(|e| e.to_string())?);
    }
    if worst < -1e-6 {
        return Err(format!("divergence {worst} below -1e-6"));
    }
    within(start, Duration::from_secs(1), "diagnostics checks")?;
    Ok(format!("H(uniform 6) = ln 6, min KL over 1e5 pairs {worst:.3e}, {:.0} ms", start.elapsed().as_secs_f64() * 1e3))
}

pub fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..10_000 {
        let n_actions = rng.gen_range(2..=6);
        let agents = rng.gen_range(1..=4);
        let len = rng.gen_range(1..=60);
        let mode = if case % 2 == 0 { TaskSwitchMode::PaperExact } else { TaskSwitchMode::FrequencyNormalized };
        let log: Vec<Vec<usize>> = (0..agents).map(|_| (0..len).map(|_| rng.gen_range(0..n_actions)).collect()).collect();
        let prof = task_switch_profile(&log, n_actions, mode).map_err(|e| e.to_string())?;
        for l in &prof.likelihood {
            let s: f64 = l.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(format!("profile sums to {s}"));
            }
        }
        let mut shuffled = log.clone();
        for l in &mut shuffled {
            l.shuffle(&mut rng);
        }
        if task_switch_profile(&shuffled, n_actions, mode).map_err(|e| e.to_string())? != prof {
            return Err("shuffling the log changed the profile".into());
        }
        let k = rng.gen_range(1..=10);
        let mut even: Vec<usize> = (0..n_actions).flat_map(|a| std::iter::repeat_n(a, k)).collect();
        even.shuffle(&mut rng);
        let u = task_switch_profile(&[even], n_actions, mode).map_err(|e| e.to_string())?;
        if u.likelihood[0].iter().any(|&p| (p - 1.0 / n_actions as f64).abs() > 1e-12) {
            return Err(format!("equal counts gave {:?}", u.likelihood[0]));
        }
    }
    within(start, Duration::from_secs(1), "task switching checks")?;
    Ok(format!("1e4 logs, {:.0} ms", start.elapsed().as_secs_f64() * 1e3))
}

/// A random small network, its loss inputs, and the loss as a function of the store.
pub struct GradCase {
    pub net: Net,
    pub store: ParamStore<f64>,
    pub x: Matrix<f64>,
    pub steps: usize,
    pub weights: Matrix<f64>,
}

impl GradCase {
    pub fn random(recurrent: bool, rng: &mut ChaCha8Rng) -> Self {
        loop {
            let input = rng.gen_range(1..=4);
            let hidden = rng.gen_range(2..=4);
            let output = rng.gen_range(1..=3);
            let spec = if recurrent { NetSpec::gru(input, hidden, output) } else { NetSpec::fc(input, hidden, output) };
            let mut store = ParamStore::<f64>::new();
            let net = Net::new(&mut store, "net", spec, HIDDEN_GAIN, rng).unwrap();
            if store.n_scalars() > 64 {
                continue;
            }
            // Move biases off zero so every parameter matters.
            for v in store.values_mut() {
                v.data.iter_mut().for_each(|p| *p += 0.3 * rng.sample::<f64, _>(StandardNormal));
            }
            let steps = if recurrent { 3 } else { 1 };
            let rows = 2 * steps;
            let gauss = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
            let x = Matrix::from_vec(rows, input, gauss(rng, rows * input));
            let weights = Matrix::from_vec(rows, output, gauss(rng, rows * output));
            return GradCase { net, store, x, steps, weights };
        }
    }

    /// `sum(w * y) + 0.5 * sum(y^2)` over the unrolled outputs.
    pub fn loss_and_grads(&self, store: &ParamStore<f64>) -> (f64, Vec<f64>) {
        let mut g = Graph::new(store);
        let x = g.input(self.x.clone());
        let h0 = self.net.initial_hidden::<f64>(self.x.rows / self.steps).map(|h| g.input(h));
        let (y, _) = self.net.unroll(&mut g, x, self.steps, h0, None).unwrap();
        let wy = g.mul_const(y, self.weights.clone()).unwrap();
        let sq = g.square(y);
        let sq = g.scale(sq, 0.5);
        let total = g.add(wy, sq).unwrap();
        let loss = g.sum(total);
        (g.scalar(loss), g.backward(loss).flatten())
    }

    /// Largest relative error between backprop and central differences.
    pub fn max_relative_error(&self) -> f64 {
        let (_, analytic) = self.loss_and_grads(&self.store);
        let h = 1e-4;
        let mut worst = 0.0f64;
        let mut k = 0;
        let mut probe = self.store.clone();
        for pi in 0..self.store.len() {
            for j in 0..self.store.values()[pi].data.len() {
                let orig = probe.values()[pi].data[j];
                probe.values_mut()[pi].data[j] = orig + h;
                let up = self.loss_and_grads(&probe).0;
                probe.values_mut()[pi].data[j] = orig - h;
                let down = self.loss_and_grads(&probe).0;
                probe.values_mut()[pi].data[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                k += 1;
            }
        }
        worst
    }
}

pub fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut max_params = 0;
    for i in 0..100 {
        let case = GradCase::random(i % 2 == 1, &mut rng);
        max_params = max_params.max(case.store.n_scalars());
        let e = case.max_relative_error();
        if e.is_nan() || e >= 1e-4 {
            return Err(format!("instance {i} ({:?} body): relative error {e:.3e}", case.net.spec.body));
        }
        worst = worst.max(e);
    }
    within(start, Duration::from_secs(30), "gradient checks")?;
    Ok(format!("100 MLP/GRU nets up to {max_params} params, max rel err {worst:.2e}"))
}

pub fn criterion_4() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let delta = 1e-3;
    let mut probes = 0;
    for draw in 0..1000 {
        let n = rng.gen_range(2..=4);
        let state_dim = rng.gen_range(1..=8);
        let mut store = ParamStore::<f64>::new();
        let mixer = QmixMixer::new(&mut store, "mixer", n, state_dim, rng.gen_range(2..=8), rng.gen_range(2..=8), &mut rng);
        for v in store.values_mut() {
            v.data.iter_mut().for_each(|p| *p += 0.5 * rng.sample::<f64, _>(StandardNormal));
        }
        let rows = 4;
        let qs: Vec<f64> = (0..rows * n).map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let states = Matrix::from_vec(rows, state_dim, (0..rows * state_dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect());
        let base = mixer.mix_values(&store, &Matrix::from_vec(rows, n, qs.clone()), &states).map_err(|e| e.to_string())?;
        for i in 0..n {
            let mut bumped = qs.clone();
            for r in 0..rows {
                bumped[r * n + i] += delta;
            }
            let up = mixer.mix_values(&store, &Matrix::from_vec(rows, n, bumped), &states).map_err(|e| e.to_string())?;
            for r in 0..rows {
                probes += 1;
                let slope = (up.data[r] - base.data[r]) / delta;
                if slope < 0.0 {
                    return Err(format!("draw {draw}: dQ_tot/dQ_{i} = {slope}"));
                }
            }
        }
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-100i32..100) as f64 / 8.0).collect();
        let exact: f64 = v.iter().fold(0.0, |a, b| a + b);
        if mix_vdn(&v) != exact {
            return Err(format!("vdn mix of {v:?} is {} not {exact}", mix_vdn(&v)));
        }
    }
    within(start, Duration::from_secs(10), "monotonicity checks")?;
    Ok(format!("{probes} probes non-negative over 1000 mixers, VDN sums exact"))
}

/// Gradients of an A2C learner and a PPO learner (clip 1e6, one epoch)
/// with identical parameters on one rollout. Returns the largest absolute
/// difference and the largest gradient magnitude.
pub fn ppo_a2c_gradient_gap(seed: u64, recurrent: bool) -> Result<(f64, f64), String> {
    let make = |alg| {
        let mut cfg = PgConfig::new(alg, true);
        cfg.hidden_dim = 16;
        cfg.n_workers = 3;
        cfg.ppo_clip = 1e6;
        cfg.ppo_epochs = 1;
        cfg.standardize_rewards = true;
        if recurrent {
            cfg.body = marl_lens::nn::Body::Gru;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PgLearner::new(cfg, 2, 12, 6, &mut rng).map_err(|e| e.to_string())
    };
    let mut a2c = make(PgAlgorithm::Maa2c)?;
    let ppo = make(PgAlgorithm::Mappo)?;
    if a2c.params() != ppo.params() {
        return Err("learners start from different parameters".into());
    }
    let sc = parse_scenario("Foraging-8x8-2p-2f-coop-v2").unwrap();
    let envs = (0..3).map(|_| Env::new(&sc, None).unwrap()).collect();
    let mut workers = RolloutWorkers::new(envs, seed).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    // Warm up so some episodes have rewards and the rollout starts mid-episode.
    let mut rollout = a2c.collect(&mut workers, &mut rng).map_err(|e| e.to_string())?;
    for _ in 0..12 {
        rollout = a2c.collect(&mut workers, &mut rng).map_err(|e| e.to_string())?;
    }
    let ga = a2c.loss_gradients(&rollout).map_err(|e| e.to_string())?.flatten();
    let gp = ppo.loss_gradients(&rollout).map_err(|e| e.to_string())?.flatten();
    let gap = ga.iter().zip(&gp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = ga.iter().map(|a| a.abs()).fold(0.0, f64::max);
    Ok((gap, scale))
}

pub fn criterion_5() -> Check {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for seed in 0..6 {
        let (gap, s) = ppo_a2c_gradient_gap(seed, seed % 2 == 1)?;
        if gap > 1e-6 {
            return Err(format!("seed {seed}: gradients differ by {gap:.3e}"));
        }
        if s == 0.0 {
            return Err(format!("seed {seed}: gradient is identically zero"));
        }
        worst = worst.max(gap);
        scale = scale.max(s);
    }
    Ok(format!("6 rollouts (FC and GRU), max gap {worst:.2e} on gradients up to {scale:.2e}"))
}

const FUZZ_TOKENS: [&str; 24] = [
    "Foraging", "rware", "-", "-", "2s", "8x8", "10x10", "15x15", "0x0", "2p", "3p", "0p", "4ag", "tiny", "small", "huge",
    "coop", "v2", "v1", "f", "x", "99999999999999999999", "ü", "",
];

/// Random scenario-like strings: token soup, and valid names with edits.
pub fn fuzz_name<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..3) {
        0 => (0..rng.gen_range(0..10)).map(|_| *FUZZ_TOKENS.choose(rng).unwrap()).collect(),
        1 => {
            let mut chars: Vec<char> = CATALOG.choose(rng).unwrap().chars().collect();
            for _ in 0..rng.gen_range(1..4) {
                let i = rng.gen_range(0..=chars.len());
                match rng.gen_range(0..3) {
                    0 if i < chars.len() => {
                        chars.remove(i);
                    }
                    1 => chars.insert(i, char::from(rng.gen_range(32u8..127))),
                    _ if i < chars.len() => chars[i] = char::from(rng.gen_range(32u8..127)),
                    _ => {}
                }
            }
            chars.into_iter().collect()
        }
        _ => (0..rng.gen_range(0..30)).map(|_| char::from(rng.gen_range(32u8..127))).collect(),
    }
}

pub fn criterion_6() -> Check {
    for name in CATALOG {
        let s = parse_scenario(name).map_err(|e| format!("{name}: {e}"))?;
        let back = render_scenario(&s);
        if back != name {
            return Err(format!("{name} rendered as {back}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let names: Vec<String> = (0..100_000).map(|_| fuzz_name(&mut rng)).collect();
    let prev = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut accepted = 0;
    let mut panicked = None;
    for n in &names {
        match panic::catch_unwind(AssertUnwindSafe(|| parse_scenario(n).map(|s| render_scenario(&s)))) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
            Err(_) => {
                panicked = Some(n.clone());
                break;
            }
        }
    }
    panic::set_hook(prev);
    if let Some(n) = panicked {
        return Err(format!("parser panicked on {n:?}"));
    }
    Ok(format!("10 names round-trip, 1e5 fuzz cases without panic ({accepted} accepted)"))
}

fn lbf_env(name: &str) -> LbfEnv {
    LbfEnv::new(&parse_scenario(name).unwrap(), 50).unwrap()
}

/// Agents around a coop food; returns whether the food was taken when only
/// the `loaders` subset loads.
pub fn coop_pickup(levels: &[u32], loaders: &[bool], shift: (u32, u32)) -> bool {
    let mut env = lbf_env(&format!("Foraging-8x8-{}p-1f-coop-v2", levels.len()));
    env.reset(0).unwrap();
    let mut s = env.state().clone();
    let centre = Pos::new(1 + shift.0, 1 + shift.1);
    let around = [(0, -1), (0, 1), (-1, 0), (1, 0)];
    s.agents = levels
        .iter()
        .zip(around)
        .map(|(&level, (dx, dy))| Agent { pos: centre.offset(dx, dy, 8, 8).unwrap(), level })
        .collect();
    s.foods = vec![Food { pos: centre, level: levels.iter().sum(), present: true }];
    env.set_state(s);
    let actions: Vec<usize> = loaders.iter().map(|&l| if l { LbfAction::Load as usize } else { LbfAction::Noop as usize }).collect();
    env.step(&actions).unwrap();
    !env.state().foods[0].present
}

pub fn snapshots(name: &str, seed: u64, steps: usize) -> Vec<String> {
    let mut env = Env::new(&parse_scenario(name).unwrap(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset(seed).unwrap();
    let mut episode = 0;
    (0..steps)
        .map(|_| {
            let a: Vec<usize> = (0..env.n_agents()).map(|_| rng.gen_range(0..env.n_actions())).collect();
            if env.step(&a).unwrap().done {
                episode += 1;
                env.reset(seed + episode).unwrap();
            }
            env.snapshot()
        })
        .collect()
}

pub fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let n = rng.gen_range(2..=4);
        let levels: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
        let loaders: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let shift = (rng.gen_range(0..6), rng.gen_range(0..6));
        let all = loaders.iter().all(|&l| l);
        if coop_pickup(&levels, &loaders, shift) != all {
            return Err(format!("levels {levels:?} loaders {loaders:?}: pickup disagrees"));
        }
    }
    let mut steps = 0;
    for (k, name) in ["rware-tiny-2ag-v1", "rware-tiny-4ag-v1", "rware-small-4ag-v1"].iter().enumerate() {
        let mut env = RwareEnv::new(&parse_scenario(name).unwrap(), 500).unwrap();
        env.reset(k as u64).unwrap();
        let n = env.n_agents();
        loop {
            let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let done = env.step(&a).unwrap().done;
            steps += 1;
            if env.state().request_queue.len() != n {
                return Err(format!("{name}: queue size {} != {n}", env.state().request_queue.len()));
            }
            if done {
                break;
            }
        }
    }
    for name in ["Foraging-8x8-2p-2f-coop-v2", "Foraging-15x15-4p-5f-v2", "rware-tiny-4ag-v1", "rware-small-4ag-v1"] {
        let a = snapshots(name, 11, 1000);
        if a != snapshots(name, 11, 1000) {
            return Err(format!("{name}: same seed gave different trajectories"));
        }
    }
    Ok(format!("2000 coop pickup states, queue constant over {steps} warehouse steps, 4 envs byte-identical over 1000 steps"))
}

pub const SMOKE_SCENARIO: &str = "Foraging-8x8-2p-2f-coop-v2";

pub fn smoke_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(SMOKE_SCENARIO, "iql", true, 200_000);
    cfg.hyperparams.epsilon_decay_steps = Some(50_000);
    cfg.experiment.out_dir = out.to_path_buf();
    cfg
}

/// Trains the desk-scale smoke run and returns its directory.
pub fn smoke_run(out: &Path) -> Result<(PathBuf, Duration), String> {
    let start = Instant::now();
    let dir = run_experiment(&smoke_config(out)).map_err(|e| e.to_string())?;
    Ok((dir, start.elapsed()))
}

pub fn criterion_8(run: &Path, took: Duration) -> Check {
    let score = RunData::load(run).and_then(|r| r.final_score()).map_err(|e| e.to_string())?;
    let baseline = random_baseline(&parse_scenario(SMOKE_SCENARIO).unwrap(), None, 2000, 8).map_err(|e| e.to_string())?;
    let detail = format!(
        "final return {score:.4} vs random {baseline:.4} ({:.1}x), trained in {:.0}s",
        score / baseline,
        took.as_secs_f64()
    );
    if score >= 3.0 * baseline {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn criterion_9(run: &Path) -> Check {
    let data = RunData::load(run).map_err(|e| e.to_string())?;
    let curves = entropy_curves(&data.diagnostics());
    if curves.len() < 2 {
        return Err(format!("{} agent entropy curves", curves.len()));
    }
    let mut parts = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let (early, late) = early_late(c);
        if late.is_nan() || late >= early {
            return Err(format!("agent {i}: late entropy {late:.4} not below early {early:.4}"));
        }
        parts.push(format!("agent {i} {early:.3} -> {late:.3}"));
    }
    let r = diagnose(run).map_err(|e| e.to_string())?.entropy_correlation.ok_or("entropy curves are constant")?;
    if r <= 0.9 {
        return Err(format!("entropy correlation {r:.4}"));
    }
    Ok(format!("{}, min pairwise r {r:.4}", parts.join(", ")))
}

pub fn criterion_10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..10_000 {
        let tasks = rng.gen_range(1..=5);
        let nx = rng.gen_range(1..=10);
        let ny = rng.gen_range(1..=10);
        // Coarse values so ties are common.
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0..4) as f64 / 3.0 } else { rng.gen() }).collect()
        };
        let x: Vec<Vec<f64>> = (0..tasks).map(|_| draw(nx)).collect();
        let y: Vec<Vec<f64>> = (0..tasks).map(|_| draw(ny)).collect();
        let a = probability_of_improvement(&x, &y).map_err(|e| e.to_string())?;
        let b = probability_of_improvement(&y, &x).map_err(|e| e.to_string())?;
        if a + b != 1.0 {
            return Err(format!("set {i}: {a} + {b} = {}", a + b));
        }
    }
    let poi = |x: &[f64], y: &[f64]| probability_of_improvement(&[x.to_vec()], &[y.to_vec()]).unwrap();
    let cases = [
        (poi(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]), 1.0),
        (poi(&[0.3, 0.7, 0.1], &[0.3, 0.7, 0.1]), 0.5),
        (poi(&[1.0, 3.0], &[2.0, 2.0]), 0.5),
    ];
    for (got, want) in cases {
        if got != want {
            return Err(format!("example gave {got}, expected {want}"));
        }
    }
    Ok("exact antisymmetry on 1e4 sets, dominance, tie and enumeration examples exact".into())
}

/// A random event stream with non-decreasing steps.
pub fn random_events<R: Rng>(n: usize, rng: &mut R) -> Vec<MetricsEvent> {
    let mut step = 0u64;
    let agents = rng.gen_range(1..=4);
    let gauss = |rng: &mut R| -> f64 { rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.gen_range(-8..8)) };
    (0..n)
        .map(|_| {
            step += rng.gen_range(0..3) * rng.gen_range(0..10_000);
            match rng.gen_range(0..4) {
                0 => {
                    let eps: Vec<f64> = (0..rng.gen_range(0..6)).map(|_| gauss(rng)).collect();
                    MetricsEvent::EvalPoint {
                        step,
                        agent_returns: (0..agents).map(|_| gauss(rng)).collect(),
                        team_return: gauss(rng),
                        episode_returns: eps,
                    }
                }
                1 => MetricsEvent::Diagnostics(DiagnosticsRecord::new(
                    step,
                    (0..agents).map(|_| rng.gen::<f64>() * 2.0).collect(),
                    (0..agents).map(|_| gauss(rng).abs()).collect(),
                )),
                2 => {
                    let counts: Vec<Vec<u64>> = (0..agents).map(|_| (0..6).map(|_| rng.gen_range(0..500)).collect()).collect();
                    let mode = if rng.gen() { TaskSwitchMode::PaperExact } else { TaskSwitchMode::FrequencyNormalized };
                    MetricsEvent::TaskSwitch { step, profile: marl_lens::diagnostics::profile_from_counts(counts, mode) }
                }
                _ => MetricsEvent::TrainLoss { step, loss: gauss(rng), epsilon: rng.gen() },
            }
        })
        .collect()
}

pub fn random_header<R: Rng>(rng: &mut R) -> MetricsHeader {
    MetricsHeader::new(RunInfo {
        scenario: CATALOG.choose(rng).unwrap().to_string(),
        algorithm: ["iql", "vdn", "qmix", "ia2c", "ippo", "maa2c", "mappo"].choose(rng).unwrap().to_string(),
        param_sharing: rng.gen(),
        seed: rng.gen(),
        n_agents: rng.gen_range(2..=4),
        n_actions: rng.gen_range(5..=6),
        total_steps: rng.gen_range(1..10_000_000),
        n_eval_points: 201,
    })
}

pub fn criterion_11(run: &Path) -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join("roundtrip.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let header = random_header(&mut rng);
    let events = random_events(10_000, &mut rng);
    write_metrics(&path, &header, &events).map_err(|e| e.to_string())?;
    let (h, e) = read_metrics(&path).map_err(|e| e.to_string())?;
    if h != header || e != events {
        let first = e.iter().zip(&events).position(|(a, b)| a != b);
        return Err(format!("round trip differs (first mismatch at {first:?})"));
    }
    let mut csv = Vec::new();
    export(&[run.to_path_buf()], ExportMetric::Returns, &mut csv).map_err(|e| e.to_string())?;
    let rows = csv::Reader::from_reader(csv.as_slice()).records().count();
    if rows != 201 {
        return Err(format!("export produced {rows} rows"));
    }
    Ok("1e4 events round-trip exactly, export gives 201 rows".into())
}

pub fn report(n: usize, result: &Check) -> bool {
    match result {
        Ok(d) => println!("criterion {n} PASS: {d}"),
        Err(d) => println!("criterion {n} FAIL: {d}"),
    }
    result.is_ok()
}

pub fn profile_sum(p: &TaskSwitchProfile) -> Vec<f64> {
    p.likelihood.iter().map(|l| l.iter().sum()).collect()
}
