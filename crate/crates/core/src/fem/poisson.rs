//! Degree-of-freedom numbering, assembly of the Laplace equation with
//! Dirichlet data, solution and L2 error.

use nalgebra::{DMatrix, Point2, Vector2};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

use super::quadrature::{quadrature, QuadratureRule, UnsupportedDegree};
use super::reference::{shared_reference, NodeLocation, ReferenceElement, UnsupportedOrder};
use super::sparse::{solve_spd, CsrMatrix, SolveError, SolveReport};
use crate::bgmesh::{edge_key, TriangleMesh};
use crate::geometry::{BoundaryDescriptor, GeometryError};
use crate::maps::{element_map, ElementMap, Flavor, MapError};
use crate::mesher::{ConformingMesh, MeshingError};

/// Quadrature degree for element stiffness matrices of order `k`.
pub fn stiffness_degree(k: usize) -> usize {
    2 * k
}

/// Quadrature degree for error norms of order `k`.
pub fn error_degree(k: usize) -> usize {
    2 * k + 2
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Order(#[from] UnsupportedOrder),
    #[error(transparent)]
    Quadrature(#[from] UnsupportedDegree),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FemError {
    pub fn kind(&self) -> &'static str {
        match self {
            FemError::Map(MapError::NonPositiveJacobian { .. }) => "NonPositiveJacobian",
            FemError::Map(MapError::CategoryThree(_)) => "CategoryThree",
            FemError::Map(MapError::Geometry(_)) | FemError::Geometry(_) => "GeometryError",
            FemError::Solve(SolveError::NotPositiveDefinite { .. }) => "SingularSystem",
            FemError::Solve(SolveError::NoConvergence { .. }) => "NoConvergence",
            FemError::Solve(SolveError::DimensionMismatch { .. }) => "DimensionMismatch",
            FemError::Order(_) => "UnsupportedOrder",
            FemError::Quadrature(_) => "UnsupportedDegree",
            FemError::Meshing(e) => e.kind(),
        }
    }
}

/// Global numbering of Lagrange nodes.
///
/// Vertex nodes take the mesh vertex ids; edge nodes follow, grouped by
/// sorted mesh edge and ordered from the smaller vertex id; interior nodes
/// come last, grouped by element. Nodes shared between elements are
/// identified through the mesh connectivity, never through coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub order: usize,
    pub n_dofs: usize,
    /// Global dof of each local node, in reference-element node order.
    pub element_dofs: Vec<Vec<usize>>,
    /// Dofs on boundary edges (edges of exactly one triangle).
    pub dirichlet: Vec<bool>,
}

pub fn number_dofs(mesh: &TriangleMesh, reference: &ReferenceElement) -> DofMap {
    let k = reference.order;
    let nv = mesh.n_vertices();
    let edges = mesh.edges();
    let per_edge = k - 1;
    let per_cell = reference.n_interior();
    let edge_base = nv;
    let cell_base = nv + edges.len() * per_edge;
    let n_dofs = cell_base + mesh.n_triangles() * per_cell;
    let edge_index = |a: usize, b: usize| edges.binary_search(&edge_key(a, b)).unwrap();

    let element_dofs: Vec<Vec<usize>> = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            reference
                .locations
                .iter()
                .map(|loc| match *loc {
                    NodeLocation::Vertex(v) => tri[v],
                    NodeLocation::Edge { edge, step } => {
                        let (a, b) = (tri[edge], tri[(edge + 1) % 3]);
                        let slot = if a < b { step - 1 } else { k - 1 - step };
                        edge_base + edge_index(a, b) * per_edge + slot
                    }
                    NodeLocation::Interior(j) => cell_base + t * per_cell + j,
                })
                .collect()
        })
        .collect();

    let mut dirichlet = vec![false; n_dofs];
    let on_boundary: std::collections::HashSet<(usize, usize)> = mesh
        .edge_triangles()
        .into_iter()
        .filter(|(_, ts)| ts.len() == 1)
        .map(|(e, _)| e)
        .collect();
    for (tri, dofs) in mesh.triangles().iter().zip(&element_dofs) {
        for (loc, &d) in reference.locations.iter().zip(dofs) {
            let boundary = match *loc {
                NodeLocation::Edge { edge, .. } => on_boundary.contains(&edge_key(tri[edge], tri[(edge + 1) % 3])),
                NodeLocation::Vertex(v) => {
                    on_boundary.contains(&edge_key(tri[v], tri[(v + 1) % 3]))
                        || on_boundary.contains(&edge_key(tri[v], tri[(v + 2) % 3]))
                }
                NodeLocation::Interior(_) => false,
            };
            dirichlet[d] |= boundary;
        }
    }
    DofMap {
        order: k,
        n_dofs,
        element_dofs,
        dirichlet,
    }
}

/// Element maps, dof numbering and node images for one flavor and order.
#[derive(Debug, Clone)]
pub struct Discretization<'a> {
    pub flavor: Flavor,
    pub order: usize,
    pub reference: &'static ReferenceElement,
    pub maps: Vec<ElementMap<'a>>,
    pub dofs: DofMap,
    /// Image of each global node under the element maps.
    pub nodes: Vec<Point2<f64>>,
}

impl<'a> Discretization<'a> {
    pub fn new(
        conforming: &ConformingMesh,
        domain: &'a BoundaryDescriptor,
        flavor: Flavor,
        k: usize,
    ) -> Result<Self, FemError> {
        let reference = shared_reference(k)?;
        let maps = (0..conforming.mesh.n_triangles())
            .into_par_iter()
            .map(|e| element_map(conforming, domain, e, flavor, reference))
            .collect::<Result<Vec<_>, _>>()?;
        let dofs = number_dofs(&conforming.mesh, reference);
        let images = maps
            .par_iter()
            .map(|m| reference.nodes.iter().map(|z| m.eval(z)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut nodes = vec![Point2::new(f64::NAN, f64::NAN); dofs.n_dofs];
        let mut set = vec![false; dofs.n_dofs];
        for (element_dofs, element_images) in dofs.element_dofs.iter().zip(&images) {
            for (&d, p) in element_dofs.iter().zip(element_images) {
                if !set[d] {
                    nodes[d] = *p;
                    set[d] = true;
                }
            }
        }
        Ok(Self {
            flavor,
            order: k,
            reference,
            maps,
            dofs,
            nodes,
        })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(&Point2<f64>) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    /// Value of the discrete function `values` at reference point `x` of
    /// `element`.
    pub fn evaluate(&self, values: &[f64], element: usize, x: &Point2<f64>) -> f64 {
        self.reference
            .values(x)
            .iter()
            .zip(&self.dofs.element_dofs[element])
            .map(|(n, &d)| n * values[d])
            .sum()
    }

    /// Legacy VTK of a discrete function: every element is split into
    /// `k^2` straight triangles through its mapped node lattice.
    pub fn vtk_string(&self, name: &str, values: &[f64]) -> String {
        let k = self.order;
        let index = |a1: usize, a2: usize| {
            self.reference
                .multi_indices
                .iter()
                .position(|m| m[1] == a1 && m[2] == a2)
                .unwrap()
        };
        let mut triangles = Vec::new();
        for dofs in &self.dofs.element_dofs {
            for i in 0..k {
                for j in 0..k - i {
                    triangles.push([dofs[index(i, j)], dofs[index(i + 1, j)], dofs[index(i, j + 1)]]);
                    if i + j + 1 < k {
                        triangles.push([dofs[index(i + 1, j)], dofs[index(i + 1, j + 1)], dofs[index(i, j + 1)]]);
                    }
                }
            }
        }
        crate::bgmesh::vtk_string(
            &self.nodes,
            &triangles,
            &[crate::bgmesh::VtkPointData { name, values }],
            &[],
        )
    }
}

/// `int_K grad N_a . grad N_b` through the element map.
pub fn element_stiffness(
    map: &ElementMap<'_>,
    reference: &ReferenceElement,
    rule: &QuadratureRule,
) -> Result<DMatrix<f64>, MapError> {
    let n = reference.n_nodes();
    let mut k = DMatrix::zeros(n, n);
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let j = map.jacobian(x)?;
        let inv_t = j.matrix.try_inverse().expect("positive determinant").transpose();
        let grads: Vec<Vector2<f64>> = reference.gradients(x).iter().map(|g| inv_t * g).collect();
        let scale = w * j.det;
        for a in 0..n {
            for b in a..n {
                let v = scale * grads[a].dot(&grads[b]);
                k[(a, b)] += v;
                if a != b {
                    k[(b, a)] += v;
                }
            }
        }
    }
    Ok(k)
}

/// Linear system over the free dofs.
#[derive(Debug, Clone)]
pub struct PoissonSystem<'a> {
    pub discretization: Discretization<'a>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Position of each dof among the unknowns; `None` for Dirichlet dofs.
    pub free_index: Vec<Option<usize>>,
    /// Interpolated boundary data on Dirichlet dofs, zero elsewhere.
    pub boundary_values: Vec<f64>,
}

/// Assembles `-Laplace u = 0` with `u = g` on the boundary. Dirichlet dofs
/// take `g` at their mapped nodes and are eliminated.
pub fn assemble_poisson<'a>(
    conforming: &ConformingMesh,
    domain: &'a BoundaryDescriptor,
    flavor: Flavor,
    k: usize,
    g: impl Fn(&Point2<f64>) -> f64,
) -> Result<PoissonSystem<'a>, FemError> {
    let discretization = Discretization::new(conforming, domain, flavor, k)?;
    assemble_on(discretization, g)
}

/// [`assemble_poisson`] on an existing discretization.
pub fn assemble_on(discretization: Discretization<'_>, g: impl Fn(&Point2<f64>) -> f64) -> Result<PoissonSystem<'_>, FemError> {
    let rule = quadrature(stiffness_degree(discretization.order))?;
    let reference = discretization.reference;
    let dofs = &discretization.dofs;

    let mut free_index = vec![None; dofs.n_dofs];
    let mut n_free = 0;
    let mut boundary_values = vec![0.0; dofs.n_dofs];
    for d in 0..dofs.n_dofs {
        if dofs.dirichlet[d] {
            boundary_values[d] = g(&discretization.nodes[d]);
        } else {
            free_index[d] = Some(n_free);
            n_free += 1;
        }
    }

    let locals = discretization
        .maps
        .par_iter()
        .map(|m| element_stiffness(m, reference, &rule))
        .collect::<Result<Vec<_>, _>>()?;

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n_free];
    for (local, element_dofs) in locals.iter().zip(&dofs.element_dofs) {
        for (a, &da) in element_dofs.iter().enumerate() {
            let Some(i) = free_index[da] else { continue };
            for (b, &db) in element_dofs.iter().enumerate() {
                match free_index[db] {
                    Some(j) => triplets.push((i, j, local[(a, b)])),
                    None => rhs[i] -= local[(a, b)] * boundary_values[db],
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n_free, triplets);
    Ok(PoissonSystem {
        discretization,
        matrix,
        rhs,
        free_index,
        boundary_values,
    })
}

/// Nodal solution of a Poisson problem.
#[derive(Debug, Clone)]
pub struct FemSolution<'a> {
    pub discretization: Discretization<'a>,
    /// Value at every global dof.
    pub values: Vec<f64>,
    pub report: SolveReport,
}

impl FemSolution<'_> {
    pub fn n_dofs(&self) -> usize {
        self.values.len()
    }

    pub fn vtk_string(&self) -> String {
        self.discretization.vtk_string("u", &self.values)
    }
}

pub fn solve(system: PoissonSystem<'_>) -> Result<FemSolution<'_>, FemError> {
    let (x, report) = solve_spd(&system.matrix, &system.rhs)?;
    let values = system
        .free_index
        .iter()
        .zip(&system.boundary_values)
        .map(|(i, g)| i.map_or(*g, |i| x[i]))
        .collect();
    Ok(FemSolution {
        discretization: system.discretization,
        values,
        report,
    })
}

/// `sqrt(sum_K int_K (u_h - u)^2)` with quadrature of degree `2k + 2`.
pub fn l2_error(solution: &FemSolution<'_>, u: impl Fn(&Point2<f64>) -> f64 + Sync) -> Result<f64, FemError> {
    l2_distance(&solution.discretization, &solution.values, u)
}

/// L2 distance between the discrete function `values` and `u`.
pub fn l2_distance(
    discretization: &Discretization<'_>,
    values: &[f64],
    u: impl Fn(&Point2<f64>) -> f64 + Sync,
) -> Result<f64, FemError> {
    let rule = quadrature(error_degree(discretization.order))?;
    let per_element = (0..discretization.maps.len())
        .into_par_iter()
        .map(|e| {
            let map = &discretization.maps[e];
            let mut s = 0.0;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let det = map.jacobian(x)?.det;
                let diff = discretization.evaluate(values, e, x) - u(&map.eval(x)?);
                s += w * det * diff * diff;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>, MapError>>()?;
    Ok(per_element.iter().sum::<f64>().sqrt())
}

/// Solution of the model problem, `e^y sin x`.
pub fn model_solution(p: &Point2<f64>) -> f64 {
    p.y.exp() * p.x.sin()
}

/// Five-point finite-difference Laplacian, used to sanity-check exact
/// solutions.
pub fn numerical_laplacian(u: impl Fn(&Point2<f64>) -> f64, p: &Point2<f64>, h: f64) -> f64 {
    let dx = Vector2::new(h, 0.0);
    let dy = Vector2::new(0.0, h);
    (u(&(p + dx)) + u(&(p - dx)) + u(&(p + dy)) + u(&(p - dy)) - 4.0 * u(p)) / (h * h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub n_dofs: usize,
    pub n_free: usize,
    pub nnz: usize,
}

impl PoissonSystem<'_> {
    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            n_dofs: self.discretization.dofs.n_dofs,
            n_free: self.matrix.n,
            nnz: self.matrix.nnz(),
        }
    }

    /// Human-readable one-line description.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{} k={} dofs={} free={} nnz={}",
            self.discretization.flavor,
            self.discretization.order,
            self.discretization.dofs.n_dofs,
            self.matrix.n,
            self.matrix.nnz()
        );
        s
    }
}
