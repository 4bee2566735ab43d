//! Convergence studies: the full pipeline (background mesh, meshing,
//! assembly, solve, error) over orders and uniform refinement levels.

use nalgebra::Point2;
use serde::Serialize;
use std::io::Write;

use super::poisson::{assemble_poisson, l2_error, model_solution, numerical_laplacian, solve, FemError, FemSolution};
use crate::bgmesh::{generate_equilateral, refine_uniform, BoundingBox, TriangleMesh};
use crate::geometry::BoundaryDescriptor;
use crate::maps::Flavor;
use crate::mesher::{run_meshing, ConformingMesh, RelaxationParams, DEFAULT_ETA, DEFAULT_R_FACTOR};

/// Coarsest background mesh size of the model study.
pub const MODEL_H0: f64 = 0.27;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub orders: Vec<usize>,
    /// Number of meshes: the coarsest and `levels - 1` refinements.
    pub levels: usize,
    pub flavor: Flavor,
    pub h0: f64,
    pub eta: f64,
    pub r_factor: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3, 4],
            levels: 4,
            flavor: Flavor::ExactConforming,
            h0: MODEL_H0,
            eta: DEFAULT_ETA,
            r_factor: DEFAULT_R_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub order: usize,
    pub level: usize,
    pub h: f64,
    pub n_dofs: usize,
    pub l2_error: Option<f64>,
    /// `log(e_prev / e) / log(h_prev / h)`; empty on the first level.
    pub observed_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub flavor: Flavor,
    pub rows: Vec<StudyRow>,
    /// Largest finite-difference Laplacian of the exact solution at a few
    /// points of the domain; near zero for a harmonic solution.
    pub laplacian_check: f64,
}

impl StudyReport {
    /// Rate between the last two levels of order `k`.
    pub fn terminal_rate(&self, k: usize) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.order == k).and_then(|r| r.observed_rate)
    }
}

/// Equilateral background covering the domain's bounding box with a margin
/// of two mesh sizes.
pub fn background_for(domain: &BoundaryDescriptor, h: f64) -> Result<TriangleMesh, FemError> {
    let (lo, hi) = domain.bounding_box();
    let m = 2.0 * h;
    generate_equilateral(BoundingBox::new([lo.x - m, lo.y - m], [hi.x + m, hi.y + m]), h)
        .map_err(|e| FemError::Meshing(crate::mesher::MeshingError::InvalidParameters(e.to_string())))
}

/// Runs the study with the model solution `e^y sin x` as Dirichlet data
/// and reference. `on_solution` sees every successful solve.
pub fn convergence_study(
    domain: &BoundaryDescriptor,
    config: &StudyConfig,
    mut on_solution: impl FnMut(usize, usize, &ConformingMesh, &FemSolution<'_>),
) -> Result<StudyReport, FemError> {
    let mut background = background_for(domain, config.h0)?;
    let mut meshes = Vec::with_capacity(config.levels);
    for level in 0..config.levels {
        if level > 0 {
            background = refine_uniform(&background);
        }
        let h = config.h0 / (1u64 << level) as f64;
        let meshed = RelaxationParams::scaled(config.eta, config.r_factor, h)
            .and_then(|params| run_meshing(&background, domain, &params));
        meshes.push((h, meshed));
    }

    let mut rows = Vec::new();
    for &k in &config.orders {
        let mut previous: Option<(f64, f64)> = None;
        for (level, (h, meshed)) in meshes.iter().enumerate() {
            let result = meshed.as_ref().map_err(|e| FemError::Meshing(e.clone())).and_then(|conforming| {
                let system = assemble_poisson(conforming, domain, config.flavor, k, model_solution)?;
                let solution = solve(system)?;
                let e = l2_error(&solution, model_solution)?;
                on_solution(k, level, conforming, &solution);
                Ok((e, solution.n_dofs()))
            });
            let row = match result {
                Ok((e, n_dofs)) => {
                    let rate = previous.map(|(hp, ep)| (ep / e).ln() / (hp / h).ln());
                    previous = Some((*h, e));
                    log::info!("k={k} level={level} h={h:.5} dofs={n_dofs} error={e:.3e} rate={rate:?}");
                    StudyRow {
                        order: k,
                        level,
                        h: *h,
                        n_dofs,
                        l2_error: Some(e),
                        observed_rate: rate,
                        error: None,
                    }
                }
                Err(err) => {
                    previous = None;
                    log::warn!("k={k} level={level}: {err}");
                    StudyRow {
                        order: k,
                        level,
                        h: *h,
                        n_dofs: 0,
                        l2_error: None,
                        observed_rate: None,
                        error: Some(format!("{}: {err}", err.kind())),
                    }
                }
            };
            rows.push(row);
        }
    }

    let laplacian_check = [(0.1, 0.2), (-0.4, 0.3), (0.5, -0.5), (0.0, 0.0)]
        .iter()
        .map(|&(x, y)| numerical_laplacian(model_solution, &Point2::new(x, y), 1e-3).abs())
        .fold(0.0, f64::max);
    Ok(StudyReport {
        flavor: config.flavor,
        rows,
        laplacian_check,
    })
}

/// CSV with header `order,level,h,l2_error,observed_rate`. Missing values
/// are left empty.
pub fn write_study_csv(report: &StudyReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "order,level,h,l2_error,observed_rate")?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{:e},{},{}",
            r.order,
            r.level,
            r.h,
            opt(r.l2_error),
            r.observed_rate.map(|v| format!("{v:.4}")).unwrap_or_default()
        )?;
    }
    Ok(())
}
