use crate::geometry::Vec3;

use super::{RenderError, TriangleMesh};

/// Parses the `v` / `f` subset of Wavefront OBJ. Face corners may be `i`,
/// `i/t`, `i//n` or `i/t/n`, with 1-based or negative (relative) indices.
/// Polygons are fan-triangulated from their first corner. All other
/// directives are ignored.
pub fn load_obj(text: &str) -> Result<TriangleMesh, RenderError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = parts.next().ok_or_else(|| RenderError::Obj {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| RenderError::Obj {
                        line: line_no,
                        msg: format!("malformed number {tok:?}"),
                    })?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let corners = parts
                    .map(|tok| resolve_index(tok, vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                if corners.len() < 3 {
                    return Err(RenderError::Obj {
                        line: line_no,
                        msg: format!("face has {} vertices, need at least 3", corners.len()),
                    });
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn resolve_index(tok: &str, count: usize, line: usize) -> Result<usize, RenderError> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| RenderError::Obj {
        line,
        msg: format!("malformed index {tok:?}"),
    })?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        -1
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(RenderError::Obj {
            line,
            msg: format!("vertex index {i} out of range (1..={count})"),
        });
    }
    Ok(resolved as usize)
}
