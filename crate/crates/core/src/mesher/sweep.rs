//! Meshing a family of rotated domains against one background mesh.

use serde::Serialize;
use std::f64::consts::TAU;

use super::{run_meshing, validate_conforming, ConformingMesh, RelaxationParams};
use crate::bgmesh::TriangleMesh;
use crate::geometry::{BoundaryDescriptor, DomainSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub angle: f64,
    pub pass: bool,
    /// Error kind (`MeshTooCoarse`, `InvertedTriangle`, ...) or
    /// `ValidationFailed` when meshing succeeded but validation did not.
    pub error: Option<String>,
    pub message: Option<String>,
    pub n_triangles: usize,
    pub n_snapped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub n_samples: usize,
    pub successes: usize,
    pub failures: usize,
    pub samples: Vec<SweepSample>,
}

/// Rotates `base` about its center through `n_samples` equally spaced
/// angles in `[0, 2 pi)` and meshes each rotated domain on the same
/// background mesh. Failures are recorded, not returned.
pub fn sweep(
    base: &DomainSpec,
    mesh: &TriangleMesh,
    params: &RelaxationParams,
    n_samples: usize,
) -> SweepReport {
    sweep_with(base, mesh, params, n_samples, |_, _| {})
}

/// [`sweep`] with a callback receiving each successful conforming mesh.
pub fn sweep_with(
    base: &DomainSpec,
    mesh: &TriangleMesh,
    params: &RelaxationParams,
    n_samples: usize,
    mut on_mesh: impl FnMut(usize, &ConformingMesh),
) -> SweepReport {
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let angle = TAU * i as f64 / n_samples as f64;
        let sample = match BoundaryDescriptor::new(base.rotated(angle)) {
            Err(e) => failed(angle, "GeometryError", e.to_string()),
            Ok(domain) => match run_meshing(mesh, &domain, params) {
                Err(e) => failed(angle, e.kind(), e.to_string()),
                Ok(conforming) => {
                    let report = validate_conforming(&conforming, &domain);
                    on_mesh(i, &conforming);
                    SweepSample {
                        angle,
                        pass: report.pass,
                        error: (!report.pass).then(|| "ValidationFailed".to_string()),
                        message: (!report.pass).then(|| format!("{report:?}")),
                        n_triangles: conforming.mesh.n_triangles(),
                        n_snapped: conforming.count(super::Provenance::Snapped),
                    }
                }
            },
        };
        if !sample.pass {
            log::info!("sweep angle {angle:.4}: {:?}", sample.error);
        }
        samples.push(sample);
    }
    let successes = samples.iter().filter(|s| s.pass).count();
    SweepReport {
        n_samples,
        successes,
        failures: n_samples - successes,
        samples,
    }
}

fn failed(angle: f64, kind: &str, message: String) -> SweepSample {
    SweepSample {
        angle,
        pass: false,
        error: Some(kind.to_string()),
        message: Some(message),
        n_triangles: 0,
        n_snapped: 0,
    }
}
