use deep_feedback::tensornet::{read_weights_file, write_weights_file, ConvNetConfig, MlpConfig, Network, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{grad_case, network_gradient_error, LAYER_NAMES};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn layer_gradients_match_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in LAYER_NAMES {
            let mut case = grad_case(&mut rng, layer);
            let err = network_gradient_error(&mut case.net, &case.x, case.aux.as_deref(), &case.c);
            prop_assert!(err < 1e-4, "{layer}: relative error {err}");
        }
    }

    #[test]
    fn forward_is_deterministic_and_pure(seed in any::<u64>(), hidden in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = MlpConfig::new(6, 3, 4);
        cfg.hidden = hidden;
        cfg.depth = 2;
        let mut net = cfg.build().unwrap();
        net.init_uniform(&mut rng, false);
        let before = net.checksum();
        let x = Tensor::vector((0..6).map(|i| i as f32 * 0.3 - 0.7).collect());
        let aux = [0.5f32, -0.25, 1.0];
        let a = net.forward(&x, Some(&aux)).unwrap();
        let b = net.forward(&x, Some(&aux)).unwrap();
        prop_assert_eq!(a.data(), b.data());
        prop_assert_eq!(net.checksum(), before);
    }

    #[test]
    fn zero_last_layer_outputs_zero(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = ConvNetConfig::new(2, 16, 16, 3, 5).build().unwrap();
        net.init_uniform(&mut rng, true);
        let x = Tensor::from_vec(&[2, 16, 16], (0..512).map(|i| (i % 7) as f32).collect()).unwrap();
        let out = net.forward(&x, Some(&[1.0, 2.0, 3.0])).unwrap();
        prop_assert!(out.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn preset_parameter_counts_match_built_networks() {
    for (c, h, w, a, o) in [(2, 64, 64, 7, 7), (3, 32, 32, 3, 3), (1, 20, 24, 0, 2)] {
        let cfg = ConvNetConfig::new(c, h, w, a, o);
        assert_eq!(cfg.build().unwrap().parameter_count(), cfg.parameter_count());
    }
    let m = MlpConfig::new(48, 32, 32);
    assert_eq!(m.build().unwrap().parameter_count(), m.parameter_count());
}

#[test]
fn weights_round_trip_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net: Network<f32> = MlpConfig::new(5, 2, 3).build().unwrap();
    net.init_uniform(&mut rng, false);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.dfnw");
    write_weights_file(&net, &path).unwrap();
    let copy = read_weights_file(&MlpConfig::new(5, 2, 3).build().unwrap(), &path).unwrap();
    assert_eq!(copy.checksum(), net.checksum());
}
