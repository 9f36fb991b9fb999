use crate::geometry::{Quat, Vec3};

use super::{KinematicsError, Skeleton};

/// How a joint rotation acts on the bones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FkConvention {
    /// `y_n = y_parent + x_n (ref_n − ref_parent)`: each rotation is a world
    /// orientation of the bone ending at joint `n`. The root rotation has no
    /// effect on positions.
    #[default]
    World,
    /// BVH-style playback: `G_n = G_parent · x_n` and
    /// `y_n = y_parent + G_parent (ref_n − ref_parent)`.
    Local,
}

impl FkConvention {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "world" => Some(FkConvention::World),
            "local" => Some(FkConvention::Local),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FkConvention::World => "world",
            FkConvention::Local => "local",
        }
    }
}

fn check(skel: &Skeleton, rotations: &[Quat]) -> Result<(), KinematicsError> {
    if rotations.len() != skel.len() {
        return Err(KinematicsError::CountMismatch {
            expected: skel.len(),
            actual: rotations.len(),
        });
    }
    for (joint, q) in rotations.iter().enumerate() {
        if !q.is_unit() {
            return Err(KinematicsError::NonUnit {
                joint,
                norm_sq: q.norm_squared(),
            });
        }
    }
    Ok(())
}

pub fn forward_kinematics(skel: &Skeleton, rotations: &[Quat]) -> Result<Vec<Vec3>, KinematicsError> {
    forward_kinematics_with(skel, rotations, FkConvention::World)
}

/// Joint positions with the root pinned at its reference position.
pub fn forward_kinematics_with(
    skel: &Skeleton,
    rotations: &[Quat],
    convention: FkConvention,
) -> Result<Vec<Vec3>, KinematicsError> {
    check(skel, rotations)?;
    let n = skel.len();
    let mut y = Vec::with_capacity(n);
    y.push(skel.reference()[0]);
    match convention {
        FkConvention::World => {
            for j in 1..n {
                let p = skel.parent(j).unwrap_or(0);
                y.push(y[p] + rotations[j].rotate_unchecked(skel.offset(j)));
            }
        }
        FkConvention::Local => {
            let mut global = Vec::with_capacity(n);
            global.push(rotations[0]);
            for j in 1..n {
                let p = skel.parent(j).unwrap_or(0);
                y.push(y[p] + global[p].rotate_unchecked(skel.offset(j)));
                global.push(global[p] * rotations[j]);
            }
        }
    }
    Ok(y)
}

/// Gradient of `v ↦ rotate_unchecked(q, v)·g` with respect to the raw
/// components of `q`, `[w, x, y, z]`.
fn rotate_grad(q: Quat, v: Vec3, g: Vec3) -> [f64; 4] {
    // rotate(q, v) = v + 2w (u × v) + 2 u × (u × v)
    //              = v + 2w (u × v) + 2 (u (u·v) − v (u·u))
    let u = q.vector();
    let gw = 2.0 * u.cross(v).dot(g);
    let gu = v.cross(g).scale(2.0 * q.w) + (g.scale(u.dot(v)) + v.scale(u.dot(g))).scale(2.0)
        - u.scale(4.0 * v.dot(g));
    [gw, gu.x, gu.y, gu.z]
}

/// Reverse pass of forward kinematics: given `dL/dy` for every joint,
/// returns `dL/dq` for every rotation, treating each quaternion's raw
/// components as independent variables of the rotation polynomial.
pub fn fk_backward(
    skel: &Skeleton,
    rotations: &[Quat],
    grad_positions: &[Vec3],
    convention: FkConvention,
) -> Result<Vec<[f64; 4]>, KinematicsError> {
    check(skel, rotations)?;
    let n = skel.len();
    if grad_positions.len() != n {
        return Err(KinematicsError::CountMismatch {
            expected: n,
            actual: grad_positions.len(),
        });
    }
    let mut gy = grad_positions.to_vec();
    let mut gq = vec![[0.0; 4]; n];
    match convention {
        FkConvention::World => {
            for j in (1..n).rev() {
                let p = skel.parent(j).unwrap_or(0);
                gq[j] = rotate_grad(rotations[j], skel.offset(j), gy[j]);
                gy[p] = gy[p] + gy[j];
            }
        }
        FkConvention::Local => {
            let mut global = Vec::with_capacity(n);
            global.push(rotations[0]);
            for j in 1..n {
                let p = skel.parent(j).unwrap_or(0);
                global.push(global[p] * rotations[j]);
            }
            let mut gg = vec![Quat::new(0.0, 0.0, 0.0, 0.0); n];
            for j in (1..n).rev() {
                let p = skel.parent(j).unwrap_or(0);
                // global[j] = global[p] * x_j
                let up = gg[j];
                let to_parent = up * rotations[j].conjugate();
                let to_local = global[p].conjugate() * up;
                let r = rotate_grad(global[p], skel.offset(j), gy[j]);
                gg[p] = Quat::new(
                    gg[p].w + to_parent.w + r[0],
                    gg[p].x + to_parent.x + r[1],
                    gg[p].y + to_parent.y + r[2],
                    gg[p].z + to_parent.z + r[3],
                );
                gq[j] = to_local.to_array();
                gy[p] = gy[p] + gy[j];
            }
            gq[0] = gg[0].to_array();
        }
    }
    Ok(gq)
}

/// Converts BVH-style local joint rotations to world bone orientations, so
/// that `World` FK of the result equals `Local` FK of the input.
pub fn local_to_world(skel: &Skeleton, local: &[Quat]) -> Result<Vec<Quat>, KinematicsError> {
    check(skel, local)?;
    let n = skel.len();
    let mut global = Vec::with_capacity(n);
    global.push(local[0]);
    let mut world = Vec::with_capacity(n);
    world.push(local[0]);
    for j in 1..n {
        let p = skel.parent(j).unwrap_or(0);
        world.push(global[p]);
        global.push(global[p] * local[j]);
    }
    Ok(world)
}

/// Sum of squared coordinate differences.
pub fn fk_energy(y_sim: &[Vec3], y_obs: &[Vec3]) -> Result<f64, KinematicsError> {
    if y_sim.len() != y_obs.len() {
        return Err(KinematicsError::CountMismatch {
            expected: y_obs.len(),
            actual: y_sim.len(),
        });
    }
    Ok(y_sim.iter().zip(y_obs).map(|(a, b)| (*a - *b).norm_squared()).sum())
}
