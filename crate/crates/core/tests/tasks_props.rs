use deep_feedback::feedback::{EncodeFeedback, ForwardModel};
use deep_feedback::geometry::{axis_angle_to_quat, Pose6DoF, Quat, Vec3};
use deep_feedback::kinematics::{random_chain, FkConvention};
use deep_feedback::render::{Image, Primitive};
use deep_feedback::tasks::{
    generate_dataset, light_metrics, pose_metrics, split_sizes, IkTask, LightKind, LightTask, PoseTask, Split, Task,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_task<T: Task>(task: &T, seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (variant, x) = task.sample(&mut rng);
    let model = task.model(variant);
    prop_assert!(model.layout().is_valid(&x, 1e-9), "sample off the manifold: {x:?}");
    let mut p = x.clone();
    model.project(&mut p);
    prop_assert!(p.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
    let y = model.simulate(&x);
    prop_assert_eq!(model.data_energy(&model.simulate(&x), &y), 0.0);
    let x0 = task.initial_estimate();
    prop_assert!(model.layout().is_valid(&x0, 1e-12));
    let row = task.metrics(variant, &x, &x);
    prop_assert!(row.values.iter().all(|&v| v.abs() < 1e-6), "{:?}", row.values);
    prop_assert_ne!(row.outlier, Some(true));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pose_samples_reproduce_exactly(seed in any::<u64>()) {
        let task = PoseTask::new(vec![Primitive::Cube, Primitive::Icosphere { subdivisions: 1 }], 0.5, 24).unwrap();
        check_task(&task, seed)?;
    }

    #[test]
    fn light_samples_reproduce_exactly(seed in any::<u64>(), point in any::<bool>()) {
        let kind = if point { LightKind::Point } else { LightKind::Directional };
        check_task(&LightTask::standard(kind, 16).unwrap(), seed)?;
    }

    #[test]
    fn ik_samples_reproduce_exactly(seed in any::<u64>(), joints in 2usize..30, local in any::<bool>()) {
        let conv = if local { FkConvention::Local } else { FkConvention::World };
        let skel = random_chain(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)), joints);
        check_task(&IkTask::new(skel, conv), seed)?;
    }

    #[test]
    fn ik_encoding_is_injective(seed in any::<u64>(), joints in 2usize..12, k in 0usize..1000, d in 1e-3f64..1.0) {
        let task = IkTask::new(random_chain(&mut ChaCha8Rng::seed_from_u64(seed), joints), FkConvention::World);
        let model = task.model(0);
        let x = task.initial_estimate();
        let (_, a) = task.sample(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let (_, b) = task.sample(&mut ChaCha8Rng::seed_from_u64(seed ^ 2));
        let (y, yt) = (model.simulate(&a), model.simulate(&b));
        let base = model.encode(&x, &yt, &y).unwrap();
        prop_assert_eq!(&base, &model.encode(&x, &yt, &y).unwrap());
        let j = k % joints;
        let mut y2 = y.clone();
        y2[j].x += d;
        let mut yt2 = yt.clone();
        yt2[j].z -= d;
        prop_assert_ne!(&base, &model.encode(&x, &yt, &y2).unwrap());
        prop_assert_ne!(&base, &model.encode(&x, &yt2, &y).unwrap());
        prop_assert_ne!(&base, &model.encode(&x, &y, &yt).unwrap());
    }

    #[test]
    fn pose_encoding_is_injective(bits in prop::collection::vec(any::<bool>(), 128), k in 0usize..64) {
        let task = PoseTask::new(vec![Primitive::Cube], 0.5, 8).unwrap();
        let model = task.model(0);
        let x = task.initial_estimate();
        let img = |b: &[bool]| Image::from_data(8, 8, 1, b.iter().map(|&v| v as u8 as f32).collect()).unwrap();
        let (y, yt) = (img(&bits[..64]), img(&bits[64..]));
        let base = model.encode(&x, &yt, &y).unwrap();
        prop_assert_eq!(&base.shape, &vec![3, 8, 8]);
        let mut flipped = bits.clone();
        flipped[k] = !flipped[k];
        prop_assert_ne!(&base, &model.encode(&x, &yt, &img(&flipped[..64])).unwrap());
        flipped[k] = bits[k];
        flipped[64 + k] = !flipped[64 + k];
        prop_assert_ne!(&base, &model.encode(&x, &img(&flipped[64..]), &y).unwrap());
    }

    #[test]
    fn split_sizes_partition(count in 10usize..100_000) {
        let (train, val, test) = split_sizes(count);
        prop_assert_eq!(train + val + test, count);
        prop_assert_eq!(val, count / 10);
        prop_assert_eq!(test, count / 5);
    }

    #[test]
    fn pose_metric_symmetry(axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0), deg in 0.0f64..60.0,
                            t in (-0.3f64..0.3, -0.3f64..0.3, -0.3f64..0.3)) {
        let q = axis_angle_to_quat(Vec3::new(axis.0, axis.1, axis.2), deg).unwrap();
        let a = Pose6DoF::new(q, Vec3::new(t.0, t.1, t.2));
        let b = Pose6DoF::new(Quat::IDENTITY, Vec3::ZERO);
        let (tr, rot, out) = pose_metrics(&a, &b);
        let (tr2, rot2, out2) = pose_metrics(&b, &a);
        prop_assert_eq!((tr, out), (tr2, out2));
        prop_assert!((rot - rot2).abs() < 1e-9);
        prop_assert!((rot - deg).abs() < 1e-6);
    }
}

#[test]
fn pose_outlier_boundaries() {
    let gt = Pose6DoF::new(Quat::IDENTITY, Vec3::ZERO);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let cases = [
        (0.0, 0.2 - 1e-9, false),
        (0.0, 0.2, false),
        (0.0, 0.2 + 1e-9, true),
        (30.001, 0.2 + 1e-9, true),
        (29.999, 0.0, false),
        (30.001, 0.0, true),
        (29.0, 0.19, false),
        (45.0, 0.5, true),
    ];
    for (deg, shift, want) in cases {
        let pred = Pose6DoF::new(axis_angle_to_quat(Vec3::Z, deg).unwrap(), x.scale(shift));
        assert_eq!(pose_metrics(&pred, &gt).2, want, "{deg}° {shift} m");
    }
}

#[test]
fn light_outlier_boundaries() {
    let gt = Vec3::ZERO;
    // squared component error sums to exactly 1.5, i.e. mse 0.5
    assert_eq!(light_metrics(Vec3::new(1.0, 0.5, 0.5), gt, 0.5), (0.5, false));
    assert!(light_metrics(Vec3::new(1.0, 0.5, 0.51), gt, 0.5).1);
    assert!(!light_metrics(Vec3::new(0.1, 0.0, 0.0), gt, 0.5).1);
}

#[test]
fn dataset_is_scheduling_independent() {
    let task = LightTask::standard(LightKind::Directional, 12).unwrap();
    let a = generate_dataset(&task, 40, 3).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| generate_dataset(&task, 40, 3).unwrap());
    assert_eq!(a.len(), 40);
    for (s, t) in a.iter().zip(&b) {
        assert_eq!(s.x_gt, t.x_gt);
        assert_eq!(s.y, t.y);
    }
    let splits: Vec<Split> = a.iter().map(|s| s.split).collect();
    assert_eq!(splits.iter().filter(|&&s| s == Split::Train).count(), 28);
    assert_eq!(splits.iter().filter(|&&s| s == Split::Val).count(), 4);
    assert_eq!(splits.iter().filter(|&&s| s == Split::Test).count(), 8);
}
