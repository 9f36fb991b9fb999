//! Fits a small MLP to a 2D function with the hand-written backward pass
//! and Adam.

use deep_feedback::tensornet::{mse_loss, AdamConfig, AdamState, NetworkBuilder, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn target(x: f32, y: f32) -> f32 {
    (2.0 * x).sin() * y
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = NetworkBuilder::new(&[2]).dense(32).relu().dense(32).relu().dense(1).build::<f32>().unwrap();
    net.init_uniform(&mut rng, false);
    let mut adam = AdamState::new(net.params(), AdamConfig { lr: 3e-3, ..AdamConfig::default() });

    let data: Vec<[f32; 2]> = (0..256).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)]).collect();
    let mut tape = Tape::new();
    for epoch in 0..=400 {
        let mut grads = net.zero_grads();
        let mut total = 0.0;
        for p in &data {
            let out = net.forward_tape(&mut tape, &Tensor::vector(p.to_vec()), None).unwrap().to_vec();
            let (loss, upstream) = mse_loss(&out, &[target(p[0], p[1])]).unwrap();
            total += loss;
            net.backward(&tape, &upstream, &mut grads).unwrap();
        }
        let n = data.len() as f32;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v /= n);
        }
        adam.step(net.params_mut(), &grads).unwrap();
        if epoch % 100 == 0 {
            println!("epoch {epoch:>3}  mse {:.5}", total / data.len() as f64);
        }
    }
}
