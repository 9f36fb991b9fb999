use rand::Rng;

use crate::geometry::Vec3;

use super::Skeleton;

pub const MIN_BONE: f64 = 0.05;
pub const MAX_BONE: f64 = 0.5;

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

fn build<R: Rng + ?Sized>(rng: &mut R, parents: Vec<Option<usize>>) -> Skeleton {
    let mut reference = vec![Vec3::ZERO];
    for p in parents.iter().skip(1) {
        let p = p.expect("non-root joint without parent");
        let len = rng.gen_range(MIN_BONE..=MAX_BONE);
        reference.push(reference[p] + random_direction(rng).scale(len));
    }
    Skeleton::from_parents(parents, reference).expect("generated skeleton is valid")
}

/// Random tree of `joints` joints (at least 2) rooted at the origin, bone
/// lengths uniform in `[0.05, 0.5]` m and directions uniform on the sphere.
pub fn random_skeleton<R: Rng + ?Sized>(rng: &mut R, joints: usize) -> Skeleton {
    let joints = joints.max(2);
    let mut parents = vec![None];
    for j in 1..joints {
        parents.push(Some(rng.gen_range(0..j)));
    }
    build(rng, parents)
}

/// Unbranched chain `0 → 1 → … → joints−1` with random bones.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, joints: usize) -> Skeleton {
    let joints = joints.max(2);
    let parents = (0..joints).map(|j| j.checked_sub(1)).collect();
    build(rng, parents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bone_lengths_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 8, 57] {
            let s = random_skeleton(&mut rng, n);
            assert_eq!(s.len(), n);
            for j in 1..n {
                let l = s.offset(j).norm();
                assert!((MIN_BONE - 1e-12..=MAX_BONE + 1e-12).contains(&l));
            }
        }
        let c = random_chain(&mut rng, 8);
        assert!((1..8).all(|j| c.parent(j) == Some(j - 1)));
    }
}
