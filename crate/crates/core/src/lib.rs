//! Learned feedback solvers for inverse problems.
//!
//! An update network looks at the current estimate, its simulation and the
//! observation, and proposes a correction; the loop repeats for a fixed
//! number of stages. Three problems are included: object pose from
//! silhouettes, lighting from shaded images and joint rotations from joint
//! positions, together with the renderer, kinematics, network stack and
//! classic optimizers they need.

pub mod classic;
pub mod feedback;
pub mod geometry;
pub mod kinematics;
pub mod pipeline;
pub mod render;
pub mod tasks;
pub mod tensornet;
pub mod training;
