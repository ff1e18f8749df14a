use marl_lens::nn::{Matrix, ParamStore};
use marl_lens::qlearn::{mix_vdn, QmixMixer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, state_dim) = (3, 5);
    let mut store = ParamStore::<f64>::new();
    let mixer = QmixMixer::new(&mut store, "mixer", n, state_dim, 8, 16, &mut rng);
    println!("mixer with {} parameters", store.n_scalars());

    let state = Matrix::from_vec(1, state_dim, (0..state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let qs = vec![0.2, -0.4, 1.1];
    let q_tot = |q: &[f64]| mixer.mix_values(&store, &Matrix::from_vec(1, n, q.to_vec()), &state).unwrap().data[0];
    println!("VDN sum {:.4}, QMIX total {:.4}", mix_vdn(&qs), q_tot(&qs));

    for agent in 0..n {
        print!("agent {agent}:");
        for delta in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            let mut q = qs.clone();
            q[agent] += delta;
            print!(" {:+.1}->{:.4}", delta, q_tot(&q));
        }
        println!();
    }
}
