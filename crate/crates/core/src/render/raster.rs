//! Z-buffer triangle rasterization.
//!
//! Projected vertices are snapped to a fixed-point grid of
//! `1 / SUBPIXEL_SCALE` pixel, and coverage is evaluated with exact integer
//! edge functions at pixel centres `(x + ½, y + ½)`. Samples lying exactly on
//! an edge belong to the triangle only if the edge is a top or left edge, so
//! triangles sharing an edge never both cover (or both miss) a sample.

use crate::geometry::{Pose6DoF, Vec3};

use super::{Camera, Image, TriangleMesh};

pub const SUBPIXEL_BITS: u32 = 8;
pub const SUBPIXEL_SCALE: i64 = 1 << SUBPIXEL_BITS;

/// Light source in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Light {
    /// Parallel light travelling along the unit vector `direction`.
    Directional { direction: Vec3, intensity: f64 },
    /// Isotropic point source with inverse-square falloff.
    Point { position: Vec3, intensity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenderMode {
    /// One channel, 1 where any triangle covers the pixel centre.
    Silhouette,
    /// One channel, distance `−z` of the nearest surface, 0 for background.
    Depth,
    /// Three channels of flat-shaded diffuse reflectance.
    Lambertian { light: Light, albedo: [f64; 3] },
}

/// Triangle in fixed-point screen space, wound so that its edge functions are
/// positive inside.
#[derive(Debug, Clone, Copy)]
struct ScreenTriangle {
    v: [[i64; 2]; 3],
    area: i64,
    depth: [f64; 3],
    cam: [Vec3; 3],
    face: usize,
}

fn snap(x: f64) -> Option<i64> {
    let s = (x * SUBPIXEL_SCALE as f64).round();
    // keeps every edge-function product well inside i64
    (s.abs() < (1i64 << 30) as f64).then_some(s as i64)
}

/// Projects and snaps every face of `mesh` posed by `pose`, preserving the
/// mesh winding. Faces with a vertex before the near plane or outside the
/// representable range are `None`.
pub fn screen_vertices(mesh: &TriangleMesh, pose: &Pose6DoF, cam: &Camera) -> Vec<Option<[[i64; 2]; 3]>> {
    let projected = project_vertices(mesh, pose, cam);
    mesh.faces()
        .iter()
        .map(|f| {
            let mut out = [[0i64; 2]; 3];
            for (slot, &vi) in out.iter_mut().zip(f) {
                let (_, p) = projected[vi]?;
                *slot = p;
            }
            Some(out)
        })
        .collect()
}

type Projected = Option<((f64, Vec3), [i64; 2])>;

fn project_vertices(mesh: &TriangleMesh, pose: &Pose6DoF, cam: &Camera) -> Vec<Projected> {
    mesh.vertices()
        .iter()
        .map(|&v| {
            let p = pose.transform_point(v);
            let (u, w, depth) = cam.project(p)?;
            Some(((depth, p), [snap(u)?, snap(w)?]))
        })
        .collect()
}

/// `(b − a) × (p − a)` in screen space.
#[inline]
fn edge(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> i64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// For positively wound triangles (clockwise on screen, y down), top edges
/// run in +x and left edges run upward.
#[inline]
fn is_top_left(a: [i64; 2], b: [i64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    (dy == 0 && dx > 0) || dy < 0
}

fn setup(mesh: &TriangleMesh, pose: &Pose6DoF, cam: &Camera) -> Vec<ScreenTriangle> {
    let projected = project_vertices(mesh, pose, cam);
    let mut tris = Vec::with_capacity(mesh.faces().len());
    'faces: for (face, f) in mesh.faces().iter().enumerate() {
        let mut v = [[0i64; 2]; 3];
        let mut depth = [0.0; 3];
        let mut camp = [Vec3::ZERO; 3];
        for k in 0..3 {
            let Some(((d, p), s)) = projected[f[k]] else {
                continue 'faces;
            };
            v[k] = s;
            depth[k] = d;
            camp[k] = p;
        }
        let mut area = edge(v[0], v[1], v[2]);
        if area == 0 {
            continue;
        }
        if area < 0 {
            v.swap(1, 2);
            depth.swap(1, 2);
            camp.swap(1, 2);
            area = -area;
        }
        tris.push(ScreenTriangle {
            v,
            area,
            depth,
            cam: camp,
            face,
        });
    }
    tris
}

/// Diffuse term `albedo · intensity · max(0, n·l)` at surface point `p` with
/// unit normal `n`, before clamping. Point lights fall off as `1/r²`.
pub fn lambert(n: Vec3, p: Vec3, light: &Light, albedo: f64) -> f64 {
    match *light {
        Light::Directional { direction, intensity } => {
            let l = -direction.normalized().unwrap_or(Vec3::ZERO);
            albedo * intensity * n.dot(l).max(0.0)
        }
        Light::Point { position, intensity } => {
            let to_light = position - p;
            let r2 = to_light.norm_squared();
            if r2 == 0.0 {
                return 0.0;
            }
            let l = to_light.scale(1.0 / r2.sqrt());
            albedo * intensity * n.dot(l).max(0.0) / r2
        }
    }
}

/// Renders `mesh` transformed by `pose` into the camera. Back-face culling is
/// off; faces crossing the near plane are skipped.
pub fn rasterize(mesh: &TriangleMesh, pose: &Pose6DoF, cam: &Camera, mode: &RenderMode) -> Image {
    let (w, h) = (cam.width, cam.height);
    let channels = if matches!(mode, RenderMode::Lambertian { .. }) { 3 } else { 1 };
    let mut img = Image::new(w, h, channels);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let tris = setup(mesh, pose, cam);
    let face_normals: Vec<Vec3> = match mode {
        RenderMode::Lambertian { .. } => tris
            .iter()
            .map(|t| pose.rotation.rotate_unchecked(mesh.face_normal(t.face)))
            .collect(),
        _ => Vec::new(),
    };

    let half = SUBPIXEL_SCALE / 2;
    for (ti, t) in tris.iter().enumerate() {
        let [a, b, c] = t.v;
        let min_x = a[0].min(b[0]).min(c[0]);
        let max_x = a[0].max(b[0]).max(c[0]);
        let min_y = a[1].min(b[1]).min(c[1]);
        let max_y = a[1].max(b[1]).max(c[1]);
        // pixel index range whose centres may fall inside the bounding box
        let x0 = ((min_x - half).div_euclid(SUBPIXEL_SCALE)).max(0);
        let x1 = ((max_x - half).div_euclid(SUBPIXEL_SCALE) + 1).min(w as i64 - 1);
        let y0 = ((min_y - half).div_euclid(SUBPIXEL_SCALE)).max(0);
        let y1 = ((max_y - half).div_euclid(SUBPIXEL_SCALE) + 1).min(h as i64 - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let owns = [is_top_left(b, c), is_top_left(c, a), is_top_left(a, b)];
        for py in y0..=y1 {
            let sy = py * SUBPIXEL_SCALE + half;
            for px in x0..=x1 {
                let p = [px * SUBPIXEL_SCALE + half, sy];
                let ws = [edge(b, c, p), edge(c, a, p), edge(a, b, p)];
                let inside = ws
                    .iter()
                    .zip(owns)
                    .all(|(&e, own)| e > 0 || (e == 0 && own));
                if !inside {
                    continue;
                }
                let idx = py as usize * w + px as usize;
                if let RenderMode::Silhouette = mode {
                    img.data[idx] = 1.0;
                    continue;
                }
                let bary = ws.map(|e| e as f64 / t.area as f64);
                let inv_depth: f64 = (0..3).map(|k| bary[k] / t.depth[k]).sum();
                let depth = 1.0 / inv_depth;
                if !(depth < zbuf[idx]) {
                    continue;
                }
                zbuf[idx] = depth;
                match mode {
                    RenderMode::Silhouette => unreachable!(),
                    RenderMode::Depth => img.data[idx] = depth as f32,
                    RenderMode::Lambertian { light, albedo } => {
                        let mut point = Vec3::ZERO;
                        for k in 0..3 {
                            point = point + t.cam[k].scale(bary[k] / t.depth[k]);
                        }
                        let point = point.scale(depth);
                        let mut n = face_normals[ti];
                        // two-sided: shade the side facing the camera
                        if n.dot(point) > 0.0 {
                            n = -n;
                        }
                        for (ch, &alb) in albedo.iter().enumerate() {
                            img.data[idx * 3 + ch] = lambert(n, point, light, alb).clamp(0.0, 1.0) as f32;
                        }
                    }
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quat;

    fn square(half: f64) -> TriangleMesh {
        let v = vec![
            Vec3::new(-half, -half, 0.0),
            Vec3::new(half, -half, 0.0),
            Vec3::new(half, half, 0.0),
            Vec3::new(-half, half, 0.0),
        ];
        TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn at(z: f64) -> Pose6DoF {
        Pose6DoF::new(Quat::IDENTITY, Vec3::new(0.0, 0.0, z))
    }

    #[test]
    fn behind_camera_is_empty() {
        let cam = Camera::with_resolution(32, 32).unwrap();
        let img = rasterize(&square(0.5), &at(2.0), &cam, &RenderMode::Silhouette);
        assert_eq!(img.coverage(), 0);
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        // A diagonal through pixel centres: each sample must be owned by
        // exactly one of the two triangles.
        let cam = Camera::new(8.0, 8.0, 8.0, 8.0, 16, 16).unwrap();
        let m = square(0.5);
        let pose = at(-1.0);
        let tri_a = TriangleMesh::new(m.vertices().to_vec(), vec![[0, 1, 2]]).unwrap();
        let tri_b = TriangleMesh::new(m.vertices().to_vec(), vec![[0, 2, 3]]).unwrap();
        let a = rasterize(&tri_a, &pose, &cam, &RenderMode::Silhouette);
        let b = rasterize(&tri_b, &pose, &cam, &RenderMode::Silhouette);
        let both = rasterize(&m, &pose, &cam, &RenderMode::Silhouette);
        for i in 0..a.data.len() {
            assert!(a.data[i] + b.data[i] <= 1.0, "pixel {i} covered twice");
            assert_eq!(a.data[i] + b.data[i], both.data[i]);
        }
        assert_eq!(both.coverage(), 64);
    }

    #[test]
    fn depth_matches_silhouette() {
        let cam = Camera::with_resolution(32, 32).unwrap();
        let m = super::super::make_primitive(super::super::Primitive::Cube, 0.5).unwrap();
        let pose = Pose6DoF::new(
            crate::geometry::axis_angle_to_quat(Vec3::new(1.0, 2.0, 0.5), 30.0).unwrap(),
            Vec3::new(0.05, 0.0, -1.5),
        );
        let sil = rasterize(&m, &pose, &cam, &RenderMode::Silhouette);
        let depth = rasterize(&m, &pose, &cam, &RenderMode::Depth);
        for (s, d) in sil.data.iter().zip(&depth.data) {
            assert_eq!(*s != 0.0, *d != 0.0);
            if *d != 0.0 {
                assert!(*d > 1.0 && *d < 2.0);
            }
        }
    }

    #[test]
    fn head_on_directional_light_saturates() {
        let cam = Camera::with_resolution(32, 32).unwrap();
        let light = Light::Directional {
            direction: -Vec3::Z,
            intensity: 1.0,
        };
        let img = rasterize(
            &square(0.5),
            &at(-2.0),
            &cam,
            &RenderMode::Lambertian {
                light,
                albedo: [1.0; 3],
            },
        );
        // interior pixels
        for y in 10..22 {
            for x in 10..22 {
                for c in 0..3 {
                    assert_eq!(img.get(x, y, c), 1.0);
                }
            }
        }
        assert_eq!(img.get(0, 0, 0), 0.0);
    }

    #[test]
    fn point_light_inverse_square_invariance() {
        let n = Vec3::new(0.2, 0.3, 0.9).normalized().unwrap();
        let p = Vec3::new(0.1, -0.2, -1.4);
        let offset = Vec3::new(0.3, 0.5, 1.1);
        for k in [0.5, 2.0, 3.7] {
            let near = Light::Point {
                position: p + offset,
                intensity: 0.8,
            };
            let far = Light::Point {
                position: p + offset.scale(k),
                intensity: 0.8 * k * k,
            };
            assert!((lambert(n, p, &near, 0.7) - lambert(n, p, &far, 0.7)).abs() < 1e-6);
        }
    }
}
