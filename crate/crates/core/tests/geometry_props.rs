use deep_feedback::geometry::{
    axis_angle_to_quat, euler_from_quat, quat_angle, quat_from_euler, quat_normalize, quat_rotate, Quat, Vec3,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn unit_quat() -> impl Strategy<Value = Quat> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("away from zero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| quat_normalize(Quat::new(w, x, y, z)).unwrap())
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

/// Rotation matrix written out from the quaternion components.
fn matrix(q: Quat) -> [[f64; 3]; 3] {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

proptest! {
    #[test]
    fn rotation_preserves_norm(q in unit_quat(), v in vec3(10.0)) {
        let r = quat_rotate(q, v).unwrap();
        prop_assert!((r.norm() - v.norm()).abs() <= 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn rotation_matches_matrix(q in unit_quat(), v in vec3(10.0)) {
        let m = matrix(q);
        let r = quat_rotate(q, v).unwrap();
        let e = Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        );
        prop_assert!(r.distance(e) < 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn product_composes_rotations(a in unit_quat(), b in unit_quat(), v in vec3(5.0)) {
        let lhs = (a * b).rotate_unchecked(v);
        let rhs = a.rotate_unchecked(b.rotate_unchecked(v));
        prop_assert!(lhs.distance(rhs) < 1e-12);
    }

    #[test]
    fn angle_is_a_pseudometric(a in unit_quat(), b in unit_quat(), c in unit_quat()) {
        let ab = quat_angle(a, b).unwrap();
        prop_assert_eq!(quat_angle(a, a).unwrap(), 0.0);
        prop_assert!((ab - quat_angle(b, a).unwrap()).abs() < 1e-9);
        prop_assert!((ab - quat_angle(a, b.neg()).unwrap()).abs() < 1e-9);
        prop_assert!((0.0..=180.0 + 1e-9).contains(&ab));
        prop_assert!(ab <= quat_angle(a, c).unwrap() + quat_angle(c, b).unwrap() + 1e-7);
    }

    #[test]
    fn angle_of_axis_angle(axis in vec3(1.0).prop_filter("nonzero", |v| v.norm() > 1e-3), deg in 0.0f64..180.0) {
        let q = axis_angle_to_quat(axis, deg).unwrap();
        prop_assert!((quat_angle(Quat::IDENTITY, q).unwrap() - deg).abs() < 1e-9);
    }

    #[test]
    fn euler_round_trip(q in unit_quat()) {
        let back = quat_from_euler(euler_from_quat(q));
        prop_assert!(quat_angle(q, back).unwrap() < 1e-6);
    }
}

#[test]
fn euler_round_trip_on_ten_thousand_quaternions() {
    let mut rng = ChaCha8Rng::seed_from_u64(89);
    let mut tested = 0;
    for _ in 0..10_000 {
        let q = common::random_unit_quat(&mut rng);
        let e = euler_from_quat(q);
        if e[1].abs() > 89f64.to_radians() {
            continue;
        }
        tested += 1;
        let err = quat_angle(q, quat_from_euler(e)).unwrap();
        assert!(err < 1e-6, "{q:?}: {err}");
    }
    assert!(tested > 9_000);
}
