//! Mesh files: JSON (lossless), legacy ASCII VTK and SVG.
//!
//! JSON schema: `{"vertices": [[x, y], ...], "triangles": [[i, j, k], ...]}`.
//! Coordinates are written with the shortest representation that parses back
//! to the identical binary64 value, so `read_json(write_json(m)) == m`.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

use super::{signed_area, BoundingBox, MeshError, TriangleMesh};

#[derive(Debug, Error)]
pub enum MeshFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: MeshError,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshJson {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

pub fn to_json_string(mesh: &TriangleMesh) -> String {
    let doc = MeshJson {
        vertices: mesh.vertices().iter().map(|p| [p.x, p.y]).collect(),
        triangles: mesh.triangles().to_vec(),
    };
    serde_json::to_string(&doc).expect("mesh serializes")
}

/// Parses a JSON mesh. Clockwise triangles are re-oriented with a warning.
pub fn from_json_str(text: &str, origin: &str) -> Result<TriangleMesh, MeshFileError> {
    let doc: MeshJson = serde_json::from_str(text).map_err(|e| MeshFileError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let vertices: Vec<Point2<f64>> = doc.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect();
    let mut triangles = doc.triangles;
    for (t, tri) in triangles.iter_mut().enumerate() {
        if tri.iter().any(|&v| v >= vertices.len()) {
            continue; // reported by validation below
        }
        if signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]) < 0.0 {
            log::warn!("{origin}: triangle {t} is clockwise; re-orienting");
            tri.swap(1, 2);
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|source| MeshFileError::Invalid {
        path: origin.to_string(),
        source,
    })
}

pub fn read_json(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json_str(&text, &path.display().to_string())
}

pub fn write_json(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), MeshFileError> {
    write_file(path.as_ref(), &to_json_string(mesh))
}

fn write_file(path: &Path, text: &str) -> Result<(), MeshFileError> {
    std::fs::write(path, text).map_err(|source| MeshFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Named per-point scalar field for VTK output.
pub struct VtkPointData<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Named per-cell integer field for VTK output.
pub struct VtkCellData<'a> {
    pub name: &'a str,
    pub values: &'a [i64],
}

/// Legacy ASCII VTK unstructured grid with triangle cells.
pub fn vtk_string(
    points: &[Point2<f64>],
    triangles: &[[usize; 3]],
    point_data: &[VtkPointData<'_>],
    cell_data: &[VtkCellData<'_>],
) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("unimesh triangulation\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {} {}", triangles.len(), 4 * triangles.len());
    for t in triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", triangles.len());
    for _ in triangles {
        s.push_str("5\n");
    }
    if !cell_data.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", triangles.len());
        for f in cell_data {
            let _ = writeln!(s, "SCALARS {} int 1\nLOOKUP_TABLE default", f.name);
            for v in f.values {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", points.len());
        for f in point_data {
            let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
            for v in f.values {
                let _ = writeln!(s, "{v:?}");
            }
        }
    }
    s
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    points: &[Point2<f64>],
    triangles: &[[usize; 3]],
    point_data: &[VtkPointData<'_>],
    cell_data: &[VtkCellData<'_>],
) -> Result<(), MeshFileError> {
    write_file(path.as_ref(), &vtk_string(points, triangles, point_data, cell_data))
}

/// SVG 1.1 drawing with one `<path>` per triangle. The y axis is flipped so
/// the picture has the usual orientation; `viewBox` equals `bbox`.
pub fn svg_string(mesh: &TriangleMesh, bbox: BoundingBox, curves: &[Vec<Point2<f64>>]) -> String {
    let (w, h) = (bbox.width(), bbox.height());
    let stroke = 1e-3 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        bbox.min[0], bbox.min[1], w, h
    );
    let _ = writeln!(
        s,
        r#"<g transform="translate(0 {}) scale(1 -1)" fill="none" stroke="black" stroke-width="{stroke}">"#,
        bbox.min[1] + bbox.max[1]
    );
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let _ = writeln!(
            s,
            r#"<path d="M {} {} L {} {} L {} {} Z"/>"#,
            a.x, a.y, b.x, b.y, c.x, c.y
        );
    }
    for curve in curves {
        let mut d = String::new();
        for (i, p) in curve.iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if i == 0 { "M " } else { "L " }, p.x, p.y);
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="red"/>"#, d.trim_end());
    }
    s.push_str("</g>\n</svg>\n");
    s
}

pub fn write_svg(
    mesh: &TriangleMesh,
    bbox: BoundingBox,
    curves: &[Vec<Point2<f64>>],
    path: impl AsRef<Path>,
) -> Result<(), MeshFileError> {
    write_file(path.as_ref(), &svg_string(mesh, bbox, curves))
}
