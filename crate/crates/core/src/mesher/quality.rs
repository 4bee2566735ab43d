//! Triangle quality: circumradius-to-inradius ratio, histograms and extreme
//! angles.

use nalgebra::Point2;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

use crate::bgmesh::{signed_area, TriangleMesh};

/// First bin edge of quality histograms; the best possible ratio.
pub const HISTOGRAM_START: f64 = 2.0;
/// Ratios at or above this value go into the overflow bin.
pub const HISTOGRAM_END: f64 = 6.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("DegenerateTriangle: triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
}

/// Circumradius over inradius, `abc * s / (4 A^2)`. Equals 2 exactly for
/// equilateral triangles and is larger otherwise; rounding below 2 is
/// clamped.
pub fn quality_ratio(p: &[Point2<f64>; 3]) -> Result<f64, QualityError> {
    let a = (p[1] - p[0]).norm();
    let b = (p[2] - p[1]).norm();
    let c = (p[0] - p[2]).norm();
    let area = signed_area(&p[0], &p[1], &p[2]).abs();
    if area == 0.0 {
        return Err(QualityError::DegenerateTriangle(0));
    }
    let s = 0.5 * (a + b + c);
    Ok((a * b * c * s / (4.0 * area * area)).max(2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    /// `f64::INFINITY` for the overflow bin.
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityHistogram {
    pub bins: Vec<HistogramBin>,
    pub total: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Histogram of the quality ratio over all triangles.
pub fn quality_histogram(mesh: &TriangleMesh, bin_width: f64) -> Result<QualityHistogram, QualityError> {
    let all: Vec<usize> = (0..mesh.n_triangles()).collect();
    quality_histogram_of(mesh, &all, bin_width)
}

/// Histogram over a subset of triangles. Bins are `[2.0, 2.0 + w)`, ... up
/// to 6.8, followed by an overflow bin `[6.8, inf)`.
pub fn quality_histogram_of(
    mesh: &TriangleMesh,
    triangles: &[usize],
    bin_width: f64,
) -> Result<QualityHistogram, QualityError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(QualityError::BadBinWidth(bin_width));
    }
    let n_bins = ((HISTOGRAM_END - HISTOGRAM_START) / bin_width - 1e-9).ceil() as usize;
    // Edges are computed from integers so that 2.0 + 3 * 0.4 prints as 3.2.
    let edge = |i: usize| round_edge(HISTOGRAM_START + i as f64 * bin_width).min(HISTOGRAM_END);
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lo: edge(i),
            hi: edge(i + 1),
            count: 0,
        })
        .collect();
    bins.push(HistogramBin {
        lo: HISTOGRAM_END,
        hi: f64::INFINITY,
        count: 0,
    });
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in triangles {
        let q = quality_ratio(&mesh.triangle_points(t)).map_err(|_| QualityError::DegenerateTriangle(t))?;
        min_ratio = min_ratio.min(q);
        max_ratio = max_ratio.max(q);
        let i = bins
            .iter()
            .position(|b| q < b.hi)
            .unwrap_or(bins.len() - 1);
        bins[i].count += 1;
    }
    Ok(QualityHistogram {
        bins,
        total: triangles.len(),
        min_ratio,
        max_ratio,
    })
}

fn round_edge(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Smallest and largest interior angle over the given triangles (all if
/// `None`), in radians.
pub fn extreme_angles(mesh: &TriangleMesh, triangles: Option<&[usize]>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |t: usize| {
        let p = mesh.triangle_points(t);
        for k in 0..3 {
            let a = p[(k + 1) % 3] - p[k];
            let b = p[(k + 2) % 3] - p[k];
            let angle = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
            lo = lo.min(angle);
            hi = hi.max(angle);
        }
    };
    match triangles {
        Some(ts) => ts.iter().for_each(|&t| visit(t)),
        None => (0..mesh.n_triangles()).for_each(&mut visit),
    }
    (lo, hi)
}

/// CSV with header `bin_lo,bin_hi,count`; the overflow bin has `bin_hi = inf`.
pub fn write_histogram_csv(hist: &QualityHistogram, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,count")?;
    for b in &hist.bins {
        if b.hi.is_finite() {
            writeln!(out, "{:.1},{:.1},{}", b.lo, b.hi, b.count)?;
        } else {
            writeln!(out, "{:.1},inf,{}", b.lo, b.count)?;
        }
    }
    Ok(())
}
