//! Backpropagation through a small recurrent network, checked against
//! central finite differences in double precision.

use marl_lens::nn::{Graph, Matrix, Net, NetSpec, ParamStore, HIDDEN_GAIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 4;
const BATCH: usize = 2;

fn loss(net: &Net, store: &ParamStore<f64>, x: &Matrix<f64>, target: &Matrix<f64>) -> (f64, Vec<f64>) {
    let mut g = Graph::new(store);
    let xn = g.input(x.clone());
    let h0 = net.initial_hidden::<f64>(BATCH).map(|h| g.input(h));
    let (y, _) = net.unroll(&mut g, xn, STEPS, h0, None).unwrap();
    let t = g.input(target.clone());
    let diff = g.sub(y, t).unwrap();
    let sq = g.square(diff);
    let l = g.mean(sq);
    (g.scalar(l), g.backward(l).flatten())
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut store = ParamStore::<f64>::new();
    let net = Net::new(&mut store, "gru", NetSpec::gru(3, 3, 2), HIDDEN_GAIN, &mut rng).unwrap();
    println!("{} parameters in {} arrays", store.n_scalars(), store.len());

    let rows = STEPS * BATCH;
    let x = Matrix::from_vec(rows, 3, (0..rows * 3).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let target = Matrix::from_vec(rows, 2, (0..rows * 2).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (l0, analytic) = loss(&net, &store, &x, &target);
    println!("loss {l0:.6}");

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut k = 0;
    let mut probe = store.clone();
    for (p, name) in store.iter().map(|(n, _)| n.to_string()).enumerate() {
        let mut layer_worst = 0.0f64;
        for j in 0..probe.values()[p].data.len() {
            let orig = probe.values()[p].data[j];
            probe.values_mut()[p].data[j] = orig + h;
            let up = loss(&net, &probe, &x, &target).0;
            probe.values_mut()[p].data[j] = orig - h;
            let down = loss(&net, &probe, &x, &target).0;
            probe.values_mut()[p].data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-6);
            layer_worst = layer_worst.max(rel);
            k += 1;
        }
        println!("{name:<12} max relative error {layer_worst:.2e}");
        worst = worst.max(layer_worst);
    }
    println!("overall {worst:.2e}");
}
