//! Background triangulations: construction, uniform refinement, immersion
//! checks and file I/O.

mod io;
mod locate;

pub use io::{
    from_json_str, read_json, svg_string, to_json_string, vtk_string, write_json, write_svg,
    write_vtk, MeshFileError, VtkCellData, VtkPointData,
};
pub use locate::TriangleLocator;

use nalgebra::Point2;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

use crate::geometry::BoundaryDescriptor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    BadVertexId {
        triangle: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {0} has non-positive signed area")]
    NonPositiveArea(usize),
    #[error("triangle {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("triangles {0} and {1} are duplicates")]
    DuplicateTriangle(usize, usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("invalid generator input: {0}")]
    InvalidInput(String),
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// A triangulation with CCW connectivity and contiguous vertex numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
}

pub fn signed_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * (b - a).perp(&(c - a))
}

/// Longest edge length.
pub fn triangle_diameter(p: &[Point2<f64>; 3]) -> f64 {
    (p[1] - p[0])
        .norm()
        .max((p[2] - p[1]).norm())
        .max((p[0] - p[2]).norm())
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriangleMesh {
    /// Builds a mesh and checks every invariant: valid ids, positive areas,
    /// no duplicate triangles, each edge in at most two triangles.
    pub fn new(vertices: Vec<Point2<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.check()?;
        Ok(mesh)
    }

    /// Skips invariant checks. Used for intermediate perturbed meshes whose
    /// validity is reported separately.
    pub(crate) fn new_unchecked(vertices: Vec<Point2<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    fn check(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        let mut edges: HashMap<(usize, usize), u8> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(MeshError::BadVertexId {
                        triangle: t,
                        vertex: v,
                        n_vertices: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex(t));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(MeshError::NonPositiveArea(t));
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(&other) = seen.get(&key) {
                return Err(MeshError::DuplicateTriangle(other, t));
            }
            seen.insert(key, t);
            for k in 0..3 {
                let e = edge_key(tri[k], tri[(k + 1) % 3]);
                let c = edges.entry(e).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(MeshError::NonManifoldEdge(e.0, e.1));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(&a, &b, &c)
    }

    /// Diameter `h_K` of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        triangle_diameter(&self.triangle_points(t))
    }

    /// Largest triangle diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            min[0] = min[0].min(v.x);
            min[1] = min[1].min(v.y);
            max[0] = max[0].max(v.x);
            max[1] = max[1].max(v.y);
        }
        BoundingBox { min, max }
    }

    /// Distinct undirected edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| edge_key(t[k], t[(k + 1) % 3])))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Map from undirected edge to the (one or two) triangles containing it.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
            }
        }
        map
    }

    /// Same connectivity, new coordinates. The result is validated.
    pub fn with_vertices(&self, vertices: Vec<Point2<f64>>) -> Result<Self, MeshError> {
        Self::new(vertices, self.triangles.clone())
    }
}

/// Tiles `bbox` (enlarged by up to one row/column) with equilateral
/// triangles of side `h`.
pub fn generate_equilateral(bbox: BoundingBox, h: f64) -> Result<TriangleMesh, MeshError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::InvalidInput(format!("mesh size must be positive, got {h}")));
    }
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(MeshError::InvalidInput(format!("degenerate bounding box {bbox:?}")));
    }
    let row_height = h * 3f64.sqrt() / 2.0;
    let n_rows = (bbox.height() / row_height).ceil().max(1.0) as usize;
    // Odd rows are shifted by h/2; one extra column on each side keeps the
    // sawtooth row ends outside the box.
    let n_cols = (bbox.width() / h).ceil() as usize + 2;
    let x0 = bbox.min[0] - 0.5 * h;
    let y0 = bbox.min[1];

    let mut vertices = Vec::with_capacity((n_rows + 1) * (n_cols + 1));
    for j in 0..=n_rows {
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..=n_cols {
            vertices.push(Point2::new(x0 + shift + i as f64 * h, y0 + j as f64 * row_height));
        }
    }
    let id = |i: usize, j: usize| j * (n_cols + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n_rows * n_cols);
    for j in 0..n_rows {
        for i in 0..n_cols {
            if j % 2 == 0 {
                // Lower row unshifted: up-triangle (i,j),(i+1,j),(i,j+1).
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Splits every triangle into four similar children through its edge
/// midpoints. Midpoints of shared edges are created once.
pub fn refine_uniform(mesh: &TriangleMesh) -> TriangleMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point2<f64>>| -> usize {
        *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push(Point2::from((p.coords + q.coords) * 0.5));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    TriangleMesh::new_unchecked(vertices, triangles)
}

/// Outcome of [`validate_immersion`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImmersionReport {
    pub pass: bool,
    pub samples_checked: usize,
    pub uncovered: usize,
    /// Up to 10 uncovered sample points.
    pub examples: Vec<[f64; 2]>,
}

/// Checks that a dense sample of the closed domain (boundary polyline plus an
/// interior grid) lies in the union of the mesh triangles.
pub fn validate_immersion(mesh: &TriangleMesh, domain: &BoundaryDescriptor) -> ImmersionReport {
    let locator = TriangleLocator::new(mesh);
    let mut samples: Vec<Point2<f64>> = domain.polyline(2048);
    let (lo, hi) = domain.bounding_box();
    let n = 100;
    for i in 0..=n {
        for j in 0..=n {
            let p = Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                lo.y + (hi.y - lo.y) * j as f64 / n as f64,
            );
            if domain.signed_distance(&p).map(|d| d < 0.0).unwrap_or(false) {
                samples.push(p);
            }
        }
    }
    let tol = 1e-12 * domain.diameter();
    let mut examples = Vec::new();
    let mut uncovered = 0;
    for p in &samples {
        if locator.locate(p, tol).is_none() {
            uncovered += 1;
            if examples.len() < 10 {
                examples.push([p.x, p.y]);
            }
        }
    }
    ImmersionReport {
        pass: uncovered == 0,
        samples_checked: samples.len(),
        uncovered,
        examples,
    }
}

#[cfg(test)]
mod tests;
