use deep_feedback::feedback::{solve, FeedbackError, ForwardModel, OracleUpdate, SolverConfig, UpdateFn};
use deep_feedback::kinematics::{random_chain, FkConvention};
use deep_feedback::tasks::{sample_ik_rotations, IkModel, PoseTask, Task};
use deep_feedback::render::Primitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic pseudo-random proposals, a different stream per stage.
struct Noise {
    seed: u64,
    scale: f64,
}

impl<M: ForwardModel + ?Sized> UpdateFn<M> for Noise {
    fn delta(&self, model: &M, stage: usize, _: &[f64], _: &M::Obs, _: &M::Obs) -> Result<Vec<f64>, FeedbackError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stage as u64);
        Ok((0..model.dim()).map(|_| rng.gen_range(-self.scale..self.scale)).collect())
    }
}

fn ik_model(seed: u64, joints: usize, conv: FkConvention) -> (IkModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skel = random_chain(&mut rng, joints);
    let x: Vec<f64> = sample_ik_rotations(&mut rng, joints).iter().flat_map(|q| q.to_array()).collect();
    (IkModel::new(skel, conv), x)
}

fn identity_estimate(joints: usize) -> Vec<f64> {
    (0..joints).flat_map(|_| [1.0, 0.0, 0.0, 0.0]).collect()
}

fn conv() -> impl Strategy<Value = FkConvention> {
    prop_oneof![Just(FkConvention::World), Just(FkConvention::Local)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn damped_energy_never_increases(seed in any::<u64>(), joints in 2usize..10, stages in 1usize..8,
                                     scale in 0.01f64..2.0, conv in conv()) {
        let (model, x_gt) = ik_model(seed, joints, conv);
        let y = model.simulate(&x_gt);
        let upd = Noise { seed: seed ^ 0x55, scale };
        let cfg = SolverConfig::new(stages).with_damping(true);
        let traj = solve(&model, &y, &identity_estimate(joints), &upd, &cfg).unwrap();
        prop_assert_eq!(traj.monotonicity_violations(), 0);
        prop_assert_eq!(traj.states.len(), stages + 1);
        for (t, s) in traj.steps.iter().enumerate() {
            prop_assert!(s.lambda > 0.0 && s.lambda <= 1.0);
            prop_assert_eq!(s.lambda.log2().fract(), 0.0);
            if s.stalled {
                prop_assert_eq!(&traj.states[t + 1], &traj.states[t]);
            } else {
                prop_assert!(traj.energies[t + 1] < traj.energies[t]);
            }
        }
        for x in &traj.states {
            prop_assert!(model.layout().is_valid(x, 1e-9));
        }
    }

    #[test]
    fn undamped_makes_one_call_per_stage(seed in any::<u64>(), joints in 2usize..10, stages in 1usize..8,
                                         scale in 0.01f64..2.0, evaluate_final in any::<bool>()) {
        let (model, x_gt) = ik_model(seed, joints, FkConvention::World);
        let y = model.simulate(&x_gt);
        let upd = Noise { seed, scale };
        let mut cfg = SolverConfig::new(stages);
        cfg.evaluate_final = evaluate_final;
        let traj = solve(&model, &y, &identity_estimate(joints), &upd, &cfg).unwrap();
        prop_assert_eq!(traj.update_calls, stages);
        prop_assert_eq!(traj.forward_calls, stages + evaluate_final as usize);
        prop_assert_eq!(traj.final_energy().is_some(), evaluate_final);
        prop_assert!(traj.steps.iter().all(|s| s.lambda == 1.0 && !s.stalled));
    }

    #[test]
    fn oracle_solves_ik_in_one_stage(seed in any::<u64>(), joints in 2usize..20, conv in conv()) {
        let (model, x_gt) = ik_model(seed, joints, conv);
        let y = model.simulate(&x_gt);
        let traj = solve(&model, &y, &identity_estimate(joints), &OracleUpdate { target: x_gt }, &SolverConfig::new(1)).unwrap();
        prop_assert!(traj.final_energy().unwrap() < 1e-20);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), raw in prop::collection::vec(-3.0f64..3.0, 7)) {
        let task = PoseTask::new(vec![Primitive::Cube], 0.5, 16).unwrap();
        let model = task.model(0);
        let mut once = raw.clone();
        model.project(&mut once);
        let mut twice = once.clone();
        model.project(&mut twice);
        prop_assert!(model.layout().is_valid(&once, 1e-12));
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        let (ik, _) = ik_model(seed, 5, FkConvention::World);
        let mut q: Vec<f64> = raw.iter().cycle().take(20).copied().collect();
        ik.project(&mut q);
        let snapshot = q.clone();
        ik.project(&mut q);
        prop_assert!(q.iter().zip(&snapshot).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
