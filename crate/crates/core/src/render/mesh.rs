use std::collections::HashMap;

use crate::geometry::Vec3;

use super::RenderError;

/// Indexed triangle mesh in object coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Builds a mesh, dropping zero-area faces and computing vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, RenderError> {
        for (i, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(RenderError::FaceIndex {
                    face: i,
                    index: bad,
                    vertices: vertices.len(),
                });
            }
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(RenderError::NonFiniteVertex(i));
        }
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| face_cross(&vertices, f).norm_squared() > 0.0)
            .collect();
        let normals = vertex_normals(&vertices, &faces);
        Ok(TriangleMesh {
            vertices,
            faces,
            normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Area-weighted unit vertex normals.
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Unit normal of face `i` following its winding.
    pub fn face_normal(&self, i: usize) -> Vec3 {
        face_cross(&self.vertices, &self.faces[i])
            .normalized()
            .unwrap_or(Vec3::Z)
    }

    /// Copy with every vertex moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Concatenation of several meshes.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for p in parts {
            let base = vertices.len();
            vertices.extend_from_slice(&p.vertices);
            faces.extend(p.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        }
        let normals = vertex_normals(&vertices, &faces);
        TriangleMesh {
            vertices,
            faces,
            normals,
        }
    }
}

fn face_cross(vertices: &[Vec3], f: &[usize; 3]) -> Vec3 {
    let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    (b - a).cross(c - a)
}

fn vertex_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::ZERO; vertices.len()];
    for f in faces {
        let n = face_cross(vertices, f);
        for &v in f {
            acc[v] = acc[v] + n;
        }
    }
    acc.into_iter().map(|n| n.normalized().unwrap_or(Vec3::Z)).collect()
}

/// Procedural watertight shapes centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Cube,
    Icosphere { subdivisions: u32 },
    Cylinder { segments: u32 },
}

impl Primitive {
    pub fn name(&self) -> String {
        match self {
            Primitive::Cube => "cube".into(),
            Primitive::Icosphere { subdivisions } => format!("icosphere{subdivisions}"),
            Primitive::Cylinder { segments } => format!("cylinder{segments}"),
        }
    }

    /// Inverse of [`Primitive::name`].
    pub fn parse(s: &str) -> Option<Primitive> {
        if s == "cube" {
            return Some(Primitive::Cube);
        }
        if let Some(n) = s.strip_prefix("icosphere") {
            return n.parse().ok().map(|subdivisions| Primitive::Icosphere { subdivisions });
        }
        if let Some(n) = s.strip_prefix("cylinder") {
            return n.parse().ok().map(|segments| Primitive::Cylinder { segments });
        }
        None
    }
}

/// Cube of edge `size`; icosphere of radius `size/2`; cylinder of radius
/// `size/2` and height `size` along y. Faces wind counter-clockwise seen
/// from outside.
pub fn make_primitive(kind: Primitive, size: f64) -> Result<TriangleMesh, RenderError> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(RenderError::InvalidPrimitive(format!("size {size}")));
    }
    match kind {
        Primitive::Cube => Ok(cube(size)),
        Primitive::Icosphere { subdivisions } if subdivisions <= 4 => Ok(icosphere(subdivisions, size / 2.0)),
        Primitive::Cylinder { segments } if segments >= 3 => Ok(cylinder(segments as usize, size / 2.0, size)),
        other => Err(RenderError::InvalidPrimitive(format!("{other:?}"))),
    }
}

fn cube(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    TriangleMesh::new(vertices, faces).expect("valid cube")
}

fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().expect("nonzero"))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vs: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                vs.push((vs[a] + vs[b]).normalized().expect("nonzero"));
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v.scale(radius)).collect();
    TriangleMesh::new(vertices, faces).expect("valid icosphere")
}

fn cylinder(segments: usize, radius: f64, height: f64) -> TriangleMesh {
    let h = height / 2.0;
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for i in 0..segments {
        let a = std::f64::consts::TAU * i as f64 / segments as f64;
        let (s, c) = a.sin_cos();
        vertices.push(Vec3::new(radius * c, -h, -radius * s));
        vertices.push(Vec3::new(radius * c, h, -radius * s));
    }
    let bottom = vertices.len();
    vertices.push(Vec3::new(0.0, -h, 0.0));
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, h, 0.0));
    let mut faces = Vec::with_capacity(4 * segments);
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
        faces.push([bottom, b1, b0]);
        faces.push([top, t0, t1]);
    }
    TriangleMesh::new(vertices, faces).expect("valid cylinder")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Signed volume; positive when faces wind outward.
    fn volume(m: &TriangleMesh) -> f64 {
        m.faces()
            .iter()
            .map(|f| {
                let v = m.vertices();
                v[f[0]].dot(v[f[1]].cross(v[f[2]])) / 6.0
            })
            .sum()
    }

    #[test]
    fn cube_counts() {
        let m = make_primitive(Primitive::Cube, 1.0).unwrap();
        assert_eq!((m.vertices().len(), m.faces().len()), (8, 12));
        assert!((volume(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn icosahedron_counts() {
        let m = make_primitive(Primitive::Icosphere { subdivisions: 0 }, 1.0).unwrap();
        assert_eq!((m.vertices().len(), m.faces().len()), (12, 20));
        assert!(volume(&m) > 0.0);
    }

    #[test]
    fn icosphere_radii() {
        let m = make_primitive(Primitive::Icosphere { subdivisions: 2 }, 0.8).unwrap();
        assert_eq!(m.faces().len(), 320);
        for v in m.vertices() {
            assert!((v.norm() - 0.4).abs() < 1e-9);
        }
        assert!(volume(&m) > 0.0);
    }

    #[test]
    fn cylinder_counts_and_winding() {
        let m = make_primitive(Primitive::Cylinder { segments: 16 }, 1.0).unwrap();
        assert_eq!((m.vertices().len(), m.faces().len()), (34, 64));
        let exact = std::f64::consts::PI * 0.25;
        let polygon = 0.5 * 16.0 * 0.25 * (std::f64::consts::TAU / 16.0).sin();
        assert!((volume(&m) - polygon).abs() < 1e-12 && polygon < exact);
    }

    #[test]
    fn invalid_parameters() {
        assert!(make_primitive(Primitive::Icosphere { subdivisions: 5 }, 1.0).is_err());
        assert!(make_primitive(Primitive::Cylinder { segments: 2 }, 1.0).is_err());
        assert!(make_primitive(Primitive::Cube, 0.0).is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in [
            Primitive::Cube,
            Primitive::Icosphere { subdivisions: 3 },
            Primitive::Cylinder { segments: 12 },
        ] {
            assert_eq!(Primitive::parse(&p.name()), Some(p));
        }
    }

    #[test]
    fn degenerate_faces_dropped() {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::X.scale(2.0)];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        for n in m.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }
}
