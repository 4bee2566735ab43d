//! Curved Lagrange finite elements for the Laplace equation on meshes
//! produced by the meshing algorithm.
//!
//! On each element the shape functions are `N_a = N̂_a o X_K^{-1}`, where
//! `X_K` is the element map of the chosen flavor composed with the affine
//! map from the reference triangle. Integrals are pulled back to the
//! reference triangle, so the inverse map is never evaluated.

pub mod poisson;
pub mod quadrature;
pub mod reference;
pub mod sparse;
pub mod study;

pub use poisson::{
    assemble_on, assemble_poisson, element_stiffness, error_degree, l2_distance, l2_error, model_solution,
    number_dofs, solve, stiffness_degree, Discretization, DofMap, FemError, FemSolution, PoissonSystem,
};
pub use quadrature::{quadrature, QuadratureRule, UnsupportedDegree, MAX_DEGREE};
pub use reference::{reference_element, shared_reference, NodeLocation, ReferenceElement, UnsupportedOrder};
pub use sparse::{solve_spd, CsrMatrix, SolveError, SolveReport, SolverKind};
pub use study::{background_for, convergence_study, write_study_csv, StudyConfig, StudyReport, StudyRow, MODEL_H0};
