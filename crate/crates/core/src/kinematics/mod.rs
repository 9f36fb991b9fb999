//! Skeletons, forward kinematics and BVH ingestion.

mod bvh;
mod fk;
mod synth;

pub use bvh::{load_bvh, write_bvh, BvhFile, Channel, Motion};
pub use fk::{fk_energy, forward_kinematics, forward_kinematics_with, local_to_world, fk_backward, FkConvention};
pub use synth::{random_chain, random_skeleton};

use crate::geometry::Vec3;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("rotation of joint {joint} is not unit (‖q‖² = {norm_sq})")]
    NonUnit { joint: usize, norm_sq: f64 },
    #[error("expected {expected} joints, got {actual}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("bvh line {line}: {msg}")]
    Bvh { line: usize, msg: String },
}

/// Joint tree in topological order with reference (rest) positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    reference: Vec<Vec3>,
}

impl Skeleton {
    /// Joint 0 is the root (`None` parent); every other joint's parent must
    /// precede it.
    pub fn new(names: Vec<String>, parents: Vec<Option<usize>>, reference: Vec<Vec3>) -> Result<Self, KinematicsError> {
        let n = parents.len();
        if n < 2 {
            return Err(KinematicsError::InvalidSkeleton(format!("need at least 2 joints, got {n}")));
        }
        if names.len() != n || reference.len() != n {
            return Err(KinematicsError::InvalidSkeleton(
                "names, parents and reference positions differ in length".into(),
            ));
        }
        if parents[0].is_some() {
            return Err(KinematicsError::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                Some(p) => {
                    return Err(KinematicsError::InvalidSkeleton(format!(
                        "joint {j} has parent {p}, parents must precede children"
                    )))
                }
                None => return Err(KinematicsError::InvalidSkeleton(format!("joint {j} is a second root"))),
            }
        }
        if let Some(j) = reference.iter().position(|r| !r.is_finite()) {
            return Err(KinematicsError::InvalidSkeleton(format!("joint {j} reference is not finite")));
        }
        Ok(Skeleton {
            names,
            parents,
            reference,
        })
    }

    /// Skeleton with generated names `j0, j1, …`.
    pub fn from_parents(parents: Vec<Option<usize>>, reference: Vec<Vec3>) -> Result<Self, KinematicsError> {
        let names = (0..parents.len()).map(|i| format!("j{i}")).collect();
        Skeleton::new(names, parents, reference)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn reference(&self) -> &[Vec3] {
        &self.reference
    }

    /// Reference bone vector from the parent of `joint` to `joint`; zero for
    /// the root.
    pub fn offset(&self, joint: usize) -> Vec3 {
        match self.parents[joint] {
            Some(p) => self.reference[joint] - self.reference[p],
            None => Vec3::ZERO,
        }
    }
}
