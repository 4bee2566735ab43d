//! Meshing of smooth planar domains immersed in background triangulations.
//!
//! A background mesh is turned into a mesh that conforms to the boundary of
//! the domain by moving vertices only: endpoints of edges that straddle the
//! boundary are snapped onto it with the closest-point projection, and
//! interior vertices close to the boundary are pushed inward. Curved element
//! maps built on top of the perturbed mesh feed a high-order Lagrange finite
//! element solver.
//!
//! - [`geometry`]: boundary curves, signed distance and projection queries.
//! - [`bgmesh`]: background triangulations and mesh file I/O.
//! - [`mesher`]: classification, snapping, relaxation and quality reports.
//! - [`maps`]: affine, exactly conforming and isoparametric element maps.
//! - [`fem`]: curved Lagrange elements and the Poisson convergence study.

pub mod bgmesh;
pub mod fem;
pub mod geometry;
pub mod maps;
pub mod mesher;

pub use bgmesh::TriangleMesh;
pub use geometry::{BoundaryDescriptor, DomainSpec};
