use deep_feedback::geometry::{quat_normalize, Quat, Vec3};
use deep_feedback::kinematics::{forward_kinematics_with, load_bvh, random_skeleton, FkConvention, Skeleton};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::matrix_fk;

fn quats(n: usize) -> impl Strategy<Value = Vec<Quat>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| {
        v.into_iter()
            .map(|(w, x, y, z)| quat_normalize(Quat::new(w + 2.0, x, y, z)).unwrap())
            .collect()
    })
}

fn skeleton_and_rotations() -> impl Strategy<Value = (Skeleton, Vec<Quat>)> {
    (2usize..=57, any::<u64>()).prop_flat_map(|(n, seed)| {
        let skel = random_skeleton(&mut ChaCha8Rng::seed_from_u64(seed), n);
        (Just(skel), quats(n))
    })
}

proptest! {
    #[test]
    fn world_fk_matches_matrix_chain((skel, q) in skeleton_and_rotations()) {
        let y = forward_kinematics_with(&skel, &q, FkConvention::World).unwrap();
        for (a, b) in y.iter().zip(matrix_fk(&skel, &q, FkConvention::World)) {
            prop_assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn local_fk_matches_matrix_chain((skel, q) in skeleton_and_rotations()) {
        let y = forward_kinematics_with(&skel, &q, FkConvention::Local).unwrap();
        for (a, b) in y.iter().zip(matrix_fk(&skel, &q, FkConvention::Local)) {
            prop_assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn bone_lengths_preserved((skel, q) in skeleton_and_rotations()) {
        for conv in [FkConvention::World, FkConvention::Local] {
            let y = forward_kinematics_with(&skel, &q, conv).unwrap();
            prop_assert!(y[0].distance(skel.reference()[0]) == 0.0);
            for j in 1..skel.len() {
                let p = skel.parent(j).unwrap();
                prop_assert!((y[j].distance(y[p]) - skel.offset(j).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fk_is_equivariant_under_root_rotation((skel, q) in skeleton_and_rotations(), r in quats(1)) {
        let r = r[0];
        let root = skel.reference()[0];
        // world frames rotate every joint, local frames only the root
        let world: Vec<Quat> = q.iter().map(|&qi| r * qi).collect();
        let mut local = q.clone();
        local[0] = r * q[0];
        for (conv, rotated) in [(FkConvention::World, world), (FkConvention::Local, local)] {
            let y = matrix_fk(&skel, &q, conv);
            let z = forward_kinematics_with(&skel, &rotated, conv).unwrap();
            for (a, b) in y.iter().zip(&z) {
                let want = root + r.rotate_unchecked(*a - root);
                prop_assert!(b.distance(want) < 1e-9);
            }
        }
    }

    #[test]
    fn identity_reproduces_reference((skel, _q) in skeleton_and_rotations()) {
        let id = vec![Quat::IDENTITY; skel.len()];
        for conv in [FkConvention::World, FkConvention::Local] {
            let y = forward_kinematics_with(&skel, &id, conv).unwrap();
            for (a, b) in y.iter().zip(skel.reference()) {
                prop_assert!(a.distance(*b) < 1e-12);
            }
        }
    }
}

#[test]
fn bvh_identity_gives_cumulative_offsets() {
    let text = "HIERARCHY
ROOT Hips
{
  OFFSET 1 2 3
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0 0.5 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT Head
    {
      OFFSET 0 0.25 0.1
      CHANNELS 3 Zrotation Xrotation Yrotation
      End Site
      {
        OFFSET 0 0.1 0
      }
    }
  }
  JOINT Leg
  {
    OFFSET 0.2 -0.4 0
    CHANNELS 3 Zrotation Xrotation Yrotation
  }
}
";
    let bvh = load_bvh(text).unwrap();
    let skel = &bvh.skeleton;
    let id = vec![Quat::IDENTITY; skel.len()];
    let y = forward_kinematics_with(skel, &id, FkConvention::Local).unwrap();
    let names: Vec<&str> = skel.names().iter().map(String::as_str).collect();
    assert_eq!(y.len(), names.len());
    // end sites may or may not become joints; compare the named ones
    let want = [
        ("Hips", Vec3::new(1.0, 2.0, 3.0)),
        ("Spine", Vec3::new(1.0, 2.5, 3.0)),
        ("Head", Vec3::new(1.0, 2.75, 3.1)),
        ("Leg", Vec3::new(1.2, 1.6, 3.0)),
    ];
    for (name, expect) in want {
        let j = names.iter().position(|n| *n == name).unwrap();
        assert!(y[j].distance(expect) < 1e-12, "{name}: {:?}", y[j]);
    }
}
