//! Conforming meshes by vertex perturbation.
//!
//! Given a background triangulation in which the domain is immersed:
//!
//! 1. classify triangles by how many vertices lie outside the domain;
//! 2. check the conditioning angle of every positively cut triangle;
//! 3. snap the endpoints of positive edges to the boundary;
//! 4. push interior vertices close to the boundary inward with the
//!    relaxation map `p_h(x) = x - eta h (1 + phi(x)/r) grad phi(x)`.
//!
//! Triangles with all three vertices outside are discarded. Connectivity is
//! never changed; only vertex coordinates move.

mod quality;
mod sweep;

pub use quality::{
    extreme_angles, quality_histogram, quality_histogram_of, quality_ratio, write_histogram_csv,
    HistogramBin, QualityError, QualityHistogram,
};
pub use sweep::{sweep, sweep_with, SweepReport, SweepSample};

use nalgebra::Point2;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::bgmesh::{edge_key, validate_immersion, TriangleMesh};
use crate::geometry::{BoundaryDescriptor, GeometryError};

/// A vertex is inside the domain iff `phi < -VERTEX_TOLERANCE * diameter`.
pub const VERTEX_TOLERANCE: f64 = 1e-12;
/// Conditioning angles must be below `pi/2 - ANGLE_TOLERANCE`.
pub const ANGLE_TOLERANCE: f64 = 1e-12;
/// Snapped vertices must satisfy `|phi| <= ON_BOUNDARY_TOLERANCE * diameter`.
pub const ON_BOUNDARY_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_ETA: f64 = 0.3;
pub const DEFAULT_R_FACTOR: f64 = 3.0;
/// Safety factor for the reach check on the band `max(r, 2h)` before meshing.
pub const MESHING_REACH_SAFETY: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshingError {
    #[error("domain is not immersed in the background mesh ({uncovered} uncovered samples)")]
    NotImmersed { uncovered: usize },
    #[error("MeshTooCoarse: {0}")]
    MeshTooCoarse(String),
    #[error("ConditioningAngleViolation: {} positively cut triangle(s) have conditioning angle >= 90 degrees (first: triangle {})", .triangles.len(), .triangles[0])]
    ConditioningAngleViolation { triangles: Vec<usize> },
    #[error("InvertedTriangle: background triangle {triangle} has signed area {area:e} after perturbation")]
    InvertedTriangle { triangle: usize, area: f64 },
    #[error("invalid relaxation parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl MeshingError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            MeshingError::NotImmersed { .. } => "NotImmersed",
            MeshingError::MeshTooCoarse(_) => "MeshTooCoarse",
            MeshingError::ConditioningAngleViolation { .. } => "ConditioningAngleViolation",
            MeshingError::InvertedTriangle { .. } => "InvertedTriangle",
            MeshingError::InvalidParameters(_) => "InvalidParameters",
            MeshingError::Geometry(GeometryError::AmbiguousProjection { .. }) => "AmbiguousProjection",
            MeshingError::Geometry(GeometryError::NoConvergence { .. }) => "NoConvergence",
            MeshingError::Geometry(_) => "GeometryError",
        }
    }
}

/// Parameters of the relaxation map: strength `eta` and band width `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationParams {
    pub eta: f64,
    pub r: f64,
}

impl RelaxationParams {
    pub fn new(eta: f64, r: f64) -> Result<Self, MeshingError> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(MeshingError::InvalidParameters(format!("eta must lie in (0, 1), got {eta}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(MeshingError::InvalidParameters(format!("r must be positive, got {r}")));
        }
        Ok(Self { eta, r })
    }

    /// `eta` with `r = r_factor * h`.
    pub fn scaled(eta: f64, r_factor: f64, h: f64) -> Result<Self, MeshingError> {
        Self::new(eta, r_factor * h)
    }
}

/// One positively cut triangle: its positive edge and conditioning data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveEdge {
    pub triangle: usize,
    /// The two exterior vertices, in the triangle's CCW order.
    pub vertices: (usize, usize),
    pub proximal_vertex: usize,
    /// Interior angle at the proximal vertex, radians.
    pub conditioning_angle: f64,
}

/// Per-vertex and per-triangle cut data for a background mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutClassification {
    /// Signed distance at every background vertex.
    pub phi: Vec<f64>,
    /// Whether each background vertex counts as outside the domain.
    pub exterior: Vec<bool>,
    /// Number of exterior vertices of each background triangle.
    pub category: Vec<u8>,
    /// Positively cut triangles, in increasing triangle order.
    pub positive_edges: Vec<PositiveEdge>,
}

impl CutClassification {
    /// Triangle counts per category 0..=3.
    pub fn category_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for &k in &self.category {
            c[k as usize] += 1;
        }
        c
    }

    /// The vertices of triangle `t` ordered by descending `phi`, exterior
    /// vertices first; ties go to the lower vertex id.
    pub fn ordered_vertices(&self, tri: [usize; 3]) -> [usize; 3] {
        let mut v = tri;
        v.sort_by(|&a, &b| {
            self.exterior[b]
                .cmp(&self.exterior[a])
                .then(self.phi[b].total_cmp(&self.phi[a]))
                .then(a.cmp(&b))
        });
        v
    }
}

fn interior_angle(mesh: &TriangleMesh, t: usize, vertex: usize) -> f64 {
    let tri = mesh.triangles()[t];
    let k = tri.iter().position(|&v| v == vertex).expect("vertex of triangle");
    let p = mesh.vertices();
    let a = p[tri[(k + 1) % 3]] - p[vertex];
    let b = p[tri[(k + 2) % 3]] - p[vertex];
    (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

/// Categorizes every triangle and records positive edges, proximal vertices
/// and conditioning angles.
pub fn classify(mesh: &TriangleMesh, domain: &BoundaryDescriptor) -> Result<CutClassification, MeshingError> {
    let phi: Vec<f64> = mesh
        .vertices()
        .par_iter()
        .map(|p| domain.signed_distance(p))
        .collect::<Result<_, _>>()?;
    let tol = VERTEX_TOLERANCE * domain.diameter();
    let exterior: Vec<bool> = phi.iter().map(|&d| d >= -tol).collect();
    let category: Vec<u8> = mesh
        .triangles()
        .iter()
        .map(|t| t.iter().filter(|&&v| exterior[v]).count() as u8)
        .collect();

    let mut positive_edges = Vec::new();
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if category[t] != 2 {
            continue;
        }
        let k = (0..3).find(|&k| !exterior[tri[k]]).unwrap();
        let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        if let Some(&other) = owner.get(&edge_key(a, b)) {
            return Err(MeshingError::MeshTooCoarse(format!(
                "positive edge ({a}, {b}) is shared by positively cut triangles {other} and {t}"
            )));
        }
        owner.insert(edge_key(a, b), t);
        let proximal = proximal_vertex(mesh, t, a, b, &phi, domain.diameter());
        positive_edges.push(PositiveEdge {
            triangle: t,
            vertices: (a, b),
            proximal_vertex: proximal,
            conditioning_angle: interior_angle(mesh, t, proximal),
        });
    }
    Ok(CutClassification {
        phi,
        exterior,
        category,
        positive_edges,
    })
}

/// The positive-edge endpoint closer to the boundary; equidistant endpoints
/// are decided by the smaller interior angle, then by the lower id.
fn proximal_vertex(mesh: &TriangleMesh, t: usize, a: usize, b: usize, phi: &[f64], diameter: f64) -> usize {
    let tie = VERTEX_TOLERANCE * diameter;
    if (phi[a] - phi[b]).abs() > tie {
        return if phi[a] < phi[b] { a } else { b };
    }
    let (ta, tb) = (interior_angle(mesh, t, a), interior_angle(mesh, t, b));
    if (ta - tb).abs() > ANGLE_TOLERANCE {
        return if ta < tb { a } else { b };
    }
    a.min(b)
}

/// Outcome of [`check_conditioning_angles`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleReport {
    pub pass: bool,
    /// Largest conditioning angle in radians (0 if nothing is cut).
    pub max_angle: f64,
    /// Positively cut triangles whose conditioning angle is not acute.
    pub offending: Vec<usize>,
}

pub fn check_conditioning_angles(classification: &CutClassification) -> AngleReport {
    let limit = FRAC_PI_2 - ANGLE_TOLERANCE;
    let offending: Vec<usize> = classification
        .positive_edges
        .iter()
        .filter(|e| e.conditioning_angle >= limit)
        .map(|e| e.triangle)
        .collect();
    AngleReport {
        pass: offending.is_empty(),
        max_angle: classification
            .positive_edges
            .iter()
            .map(|e| e.conditioning_angle)
            .fold(0.0, f64::max),
        offending,
    }
}

/// The relaxation map `p_h`. Points with `phi` outside `(-r, 0)` are
/// returned bitwise unchanged.
pub fn relax_vertex(
    x: &Point2<f64>,
    domain: &BoundaryDescriptor,
    params: &RelaxationParams,
    h: f64,
) -> Result<Point2<f64>, GeometryError> {
    let phi = domain.signed_distance(x)?;
    relax_with_phi(x, phi, domain, params, h)
}

fn relax_with_phi(
    x: &Point2<f64>,
    phi: f64,
    domain: &BoundaryDescriptor,
    params: &RelaxationParams,
    h: f64,
) -> Result<Point2<f64>, GeometryError> {
    if !(-params.r < phi && phi < 0.0) {
        return Ok(*x);
    }
    let grad = domain.distance_gradient(x)?;
    Ok(x - grad * (params.eta * h * (1.0 + phi / params.r)))
}

/// Mesh size near the boundary: the largest diameter among triangles with a
/// vertex within three of their own diameters of the boundary.
pub fn local_mesh_size(mesh: &TriangleMesh, classification: &CutClassification) -> f64 {
    (0..mesh.n_triangles())
        .filter_map(|t| {
            let d = mesh.diameter(t);
            let near = mesh.triangles()[t]
                .iter()
                .any(|&v| classification.phi[v].abs() <= 3.0 * d);
            near.then_some(d)
        })
        .fold(0.0, f64::max)
}

/// How a conforming-mesh vertex was obtained from its background vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Unchanged,
    Snapped,
    Relaxed,
}

/// Order in which snapping and relaxation are applied. Both orders give
/// identical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepOrder {
    #[default]
    SnapFirst,
    RelaxFirst,
}

/// A mesh of the domain obtained by perturbing a background mesh.
///
/// `mesh` uses a compact numbering; `vertex_ids` (increasing) maps it back to
/// background vertex ids and `triangle_ids` to background triangles, so
/// every connectivity tuple matches the background tuple exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformingMesh {
    pub mesh: TriangleMesh,
    pub vertex_ids: Vec<usize>,
    pub triangle_ids: Vec<usize>,
    pub provenance: Vec<Provenance>,
    /// Unperturbed coordinates of each compact vertex.
    pub background_vertices: Vec<Point2<f64>>,
    pub classification: CutClassification,
    pub params: RelaxationParams,
    /// Mesh size used in the relaxation map.
    pub h: f64,
}

impl ConformingMesh {
    /// Indices (compact) of triangles with at least one moved vertex.
    pub fn perturbed_triangles(&self) -> Vec<usize> {
        (0..self.mesh.n_triangles())
            .filter(|&t| {
                self.mesh.triangles()[t]
                    .iter()
                    .any(|&v| self.provenance[v] != Provenance::Unchanged)
            })
            .collect()
    }

    /// Compact id of a background vertex, if retained.
    pub fn compact_vertex(&self, background_id: usize) -> Option<usize> {
        self.vertex_ids.binary_search(&background_id).ok()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }
}

/// Runs the meshing algorithm with the mesh size taken from
/// [`local_mesh_size`].
pub fn run_meshing(
    mesh: &TriangleMesh,
    domain: &BoundaryDescriptor,
    params: &RelaxationParams,
) -> Result<ConformingMesh, MeshingError> {
    run_meshing_with(mesh, domain, params, None, StepOrder::SnapFirst)
}

/// Runs the meshing algorithm. `h` overrides the mesh size in the relaxation
/// map.
pub fn run_meshing_with(
    mesh: &TriangleMesh,
    domain: &BoundaryDescriptor,
    params: &RelaxationParams,
    h: Option<f64>,
    order: StepOrder,
) -> Result<ConformingMesh, MeshingError> {
    let immersion = validate_immersion(mesh, domain);
    if !immersion.pass {
        return Err(MeshingError::NotImmersed {
            uncovered: immersion.uncovered,
        });
    }
    let classification = classify(mesh, domain)?;
    let angles = check_conditioning_angles(&classification);
    if !angles.pass {
        return Err(MeshingError::ConditioningAngleViolation {
            triangles: angles.offending,
        });
    }
    let h = h.unwrap_or_else(|| local_mesh_size(mesh, &classification));
    let band = params.r.max(2.0 * h);
    let reach = domain.reach_margin(band, MESHING_REACH_SAFETY);
    if !reach.pass {
        return Err(MeshingError::MeshTooCoarse(format!(
            "band {band:.4} times max curvature {:.4} is {:.3}, must stay below {MESHING_REACH_SAFETY}",
            reach.max_abs_curvature, reach.margin
        )));
    }

    let n = mesh.n_vertices();
    let exterior = &classification.exterior;
    let mut snap = vec![false; n];
    for e in &classification.positive_edges {
        snap[e.vertices.0] = true;
        snap[e.vertices.1] = true;
    }
    let retained: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| classification.category[t] < 3)
        .collect();
    for &t in &retained {
        for &v in &mesh.triangles()[t] {
            if exterior[v] && !snap[v] {
                return Err(MeshingError::MeshTooCoarse(format!(
                    "exterior vertex {v} of triangle {t} is not on a positive edge"
                )));
            }
        }
    }

    let mut positions: Vec<Point2<f64>> = mesh.vertices().to_vec();
    let mut provenance = vec![Provenance::Unchanged; n];
    let snap_step = |positions: &mut Vec<Point2<f64>>, provenance: &mut Vec<Provenance>| -> Result<(), MeshingError> {
        let ids: Vec<usize> = (0..n).filter(|&v| snap[v]).collect();
        let images: Vec<Point2<f64>> = ids
            .par_iter()
            .map(|&v| domain.closest_point(&mesh.vertices()[v]))
            .collect::<Result<_, _>>()?;
        for (&v, p) in ids.iter().zip(images) {
            positions[v] = p;
            provenance[v] = Provenance::Snapped;
        }
        Ok(())
    };
    let relax_step = |positions: &mut Vec<Point2<f64>>, provenance: &mut Vec<Provenance>| -> Result<(), MeshingError> {
        let ids: Vec<usize> = (0..n)
            .filter(|&v| !exterior[v] && -params.r < classification.phi[v])
            .collect();
        let images: Vec<Point2<f64>> = ids
            .par_iter()
            .map(|&v| relax_with_phi(&mesh.vertices()[v], classification.phi[v], domain, params, h))
            .collect::<Result<_, _>>()?;
        for (&v, p) in ids.iter().zip(images) {
            if p != mesh.vertices()[v] {
                positions[v] = p;
                provenance[v] = Provenance::Relaxed;
            }
        }
        Ok(())
    };
    match order {
        StepOrder::SnapFirst => {
            snap_step(&mut positions, &mut provenance)?;
            relax_step(&mut positions, &mut provenance)?;
        }
        StepOrder::RelaxFirst => {
            relax_step(&mut positions, &mut provenance)?;
            snap_step(&mut positions, &mut provenance)?;
        }
    }

    let mut used = vec![false; n];
    for &t in &retained {
        for &v in &mesh.triangles()[t] {
            used[v] = true;
        }
    }
    let vertex_ids: Vec<usize> = (0..n).filter(|&v| used[v]).collect();
    let mut compact = vec![usize::MAX; n];
    for (i, &v) in vertex_ids.iter().enumerate() {
        compact[v] = i;
    }
    let triangles: Vec<[usize; 3]> = retained
        .iter()
        .map(|&t| mesh.triangles()[t].map(|v| compact[v]))
        .collect();
    let vertices: Vec<Point2<f64>> = vertex_ids.iter().map(|&v| positions[v]).collect();
    let out = TriangleMesh::new_unchecked(vertices, triangles);
    for (i, &t) in retained.iter().enumerate() {
        let area = out.signed_area(i);
        if area <= 0.0 {
            return Err(MeshingError::InvertedTriangle { triangle: t, area });
        }
    }
    let out = TriangleMesh::new(out.vertices().to_vec(), out.triangles().to_vec())
        .map_err(|e| MeshingError::MeshTooCoarse(format!("perturbed mesh is invalid: {e}")))?;
    let provenance = vertex_ids.iter().map(|&v| provenance[v]).collect();
    let background_vertices = vertex_ids.iter().map(|&v| mesh.vertices()[v]).collect();
    Ok(ConformingMesh {
        mesh: out,
        vertex_ids,
        triangle_ids: retained,
        provenance,
        background_vertices,
        classification,
        params: *params,
        h,
    })
}

/// Outcome of [`validate_conforming`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformingReport {
    pub pass: bool,
    /// Compact triangles with non-positive area.
    pub non_positive_area: Vec<usize>,
    /// Snapped compact vertices farther than the tolerance from the boundary.
    pub off_boundary: Vec<usize>,
    /// Whether the boundary loop visits snapped vertices in boundary order,
    /// winding exactly once.
    pub monotone: bool,
    pub boundary_loops: usize,
    /// Pairs of snapped compact vertices at the same location.
    pub coincident: Vec<(usize, usize)>,
    /// Vertices that were both snapped and relaxed (always empty for output
    /// of [`run_meshing`]).
    pub snap_relax_overlap: Vec<usize>,
}

/// Checks a conforming mesh: positive areas, snapped vertices on the
/// boundary, boundary order preserved along the boundary loop, and no
/// coincident snapped vertices.
pub fn validate_conforming(conforming: &ConformingMesh, domain: &BoundaryDescriptor) -> ConformingReport {
    let mesh = &conforming.mesh;
    let diameter = domain.diameter();
    let non_positive_area: Vec<usize> = (0..mesh.n_triangles()).filter(|&t| mesh.signed_area(t) <= 0.0).collect();
    let snapped: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| conforming.provenance[v] == Provenance::Snapped)
        .collect();

    let queries: Vec<Option<(f64, f64)>> = snapped
        .par_iter()
        .map(|&v| {
            domain
                .query(&mesh.vertices()[v])
                .ok()
                .map(|q| (q.signed_distance, q.parameter))
        })
        .collect();
    let mut parameter = HashMap::new();
    let mut off_boundary = Vec::new();
    for (&v, q) in snapped.iter().zip(&queries) {
        match q {
            Some((d, t)) if d.abs() <= ON_BOUNDARY_TOLERANCE * diameter => {
                parameter.insert(v, *t);
            }
            _ => off_boundary.push(v),
        }
    }

    // Boundary edges (in one triangle only), oriented as in that triangle.
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut branching = false;
    for (&(a, b), tris) in &mesh.edge_triangles() {
        if tris.len() != 1 {
            continue;
        }
        let tri = mesh.triangles()[tris[0]];
        let k = tri.iter().position(|&v| v == a).unwrap();
        let (from, to) = if tri[(k + 1) % 3] == b { (a, b) } else { (b, a) };
        branching |= next.insert(from, to).is_some();
    }
    let mut monotone = !branching && !next.is_empty();
    let mut boundary_loops = 0;
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if visited.contains_key(&start) {
            continue;
        }
        boundary_loops += 1;
        let mut winding = 0.0;
        let mut v = start;
        loop {
            visited.insert(v, true);
            let Some(&w) = next.get(&v) else {
                monotone = false;
                break;
            };
            match (parameter.get(&v), parameter.get(&w)) {
                (Some(&tv), Some(&tw)) => {
                    let step = (tw - tv).rem_euclid(1.0);
                    if !(step > 0.0 && step < 0.5) {
                        monotone = false;
                    }
                    winding += step;
                }
                _ => monotone = false,
            }
            v = w;
            if v == start || visited.contains_key(&v) {
                break;
            }
        }
        if (winding - 1.0).abs() > 1e-9 {
            monotone = false;
        }
    }
    if boundary_loops != 1 {
        monotone = false;
    }

    let mut coincident = Vec::new();
    let tol = 1e-12 * diameter;
    let mut by_param: Vec<(f64, usize)> = parameter.iter().map(|(&v, &t)| (t, v)).collect();
    by_param.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for i in 0..by_param.len() {
        for j in i + 1..by_param.len() {
            let (vi, vj) = (by_param[i].1, by_param[j].1);
            let d = (mesh.vertices()[vi] - mesh.vertices()[vj]).norm();
            if d <= tol {
                coincident.push((vi.min(vj), vi.max(vj)));
            }
            if by_param[j].0 - by_param[i].0 > 1e-6 {
                break;
            }
        }
    }
    // The parameter wraps at 1; compare the ends of the sorted list too.
    if by_param.len() > 1 {
        let (a, b) = (by_param[0].1, by_param[by_param.len() - 1].1);
        if (mesh.vertices()[a] - mesh.vertices()[b]).norm() <= tol {
            coincident.push((a.min(b), a.max(b)));
        }
    }
    coincident.sort_unstable();
    coincident.dedup();

    let snap_relax_overlap: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| {
            let b = conforming.vertex_ids[v];
            let exterior = conforming.classification.exterior[b];
            match conforming.provenance[v] {
                Provenance::Relaxed => exterior,
                Provenance::Snapped => !exterior,
                Provenance::Unchanged => false,
            }
        })
        .collect();

    ConformingReport {
        pass: non_positive_area.is_empty()
            && off_boundary.is_empty()
            && monotone
            && coincident.is_empty()
            && snap_relax_overlap.is_empty(),
        non_positive_area,
        off_boundary,
        monotone,
        boundary_loops,
        coincident,
        snap_relax_overlap,
    }
}
