//! Non-differentiable forward rendering: pinhole camera, meshes, and a
//! z-buffer rasterizer producing silhouettes, depth and Lambertian shading.

mod camera;
mod image;
mod mesh;
mod obj;
mod raster;

pub use camera::{Camera, NEAR_PLANE};
pub use image::{mean_squared_difference, silhouette_energy, Image};
pub use mesh::{make_primitive, Primitive, TriangleMesh};
pub use obj::load_obj;
pub use raster::{lambert, rasterize, screen_vertices, Light, RenderMode, SUBPIXEL_BITS, SUBPIXEL_SCALE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("obj line {line}: {msg}")]
    Obj { line: usize, msg: String },
    #[error("face {face} references vertex {index} but mesh has {vertices}")]
    FaceIndex { face: usize, index: usize, vertices: usize },
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),
    #[error("camera needs positive focal lengths and at least 8×8 pixels")]
    InvalidCamera,
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("expected {expected:?} (w, h, c) samples, got {actual}")]
    ImageSize {
        expected: (usize, usize, usize),
        actual: usize,
    },
    #[error("silhouette is not binary")]
    NotBinary,
    #[error("pnm: {0}")]
    Pnm(String),
    #[error("io: {0}")]
    Io(String),
}
