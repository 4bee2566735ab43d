//! Boundary representations and the signed-distance / closest-point kernel.
//!
//! A [`BoundaryDescriptor`] wraps a closed, simple, counter-clockwise C² curve
//! and answers the three queries the rest of the crate is built on: the
//! signed distance `phi` (negative inside), the closest-point projection
//! `pi`, and the distance gradient (the outward unit normal at `pi(x)`).
//!
//! Circles are projected analytically. Every other variant is seeded by a
//! global scan over a dense sample polyline and finished with a safeguarded
//! Newton iteration on the squared distance.

mod curve;

pub use curve::CurvePoint;

use curve::{star_radius, Curve, PeriodicSpline};
use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

/// Number of polyline samples used to seed projections.
pub const SEED_SAMPLES: usize = 4096;
/// Newton stopping tolerance, relative to the curve diameter.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
/// Newton iteration cap.
pub const NEWTON_MAX_ITERATIONS: usize = 50;
/// Two footpoints farther apart than this (relative to the diameter) are distinct.
pub const AMBIGUITY_SEPARATION: f64 = 1e-6;
/// Two distinct footpoints closer in distance than this (relative) are ambiguous.
pub const AMBIGUITY_DISTANCE_GAP: f64 = 1e-9;
/// Default safety factor for [`BoundaryDescriptor::reach_margin`].
pub const DEFAULT_REACH_SAFETY: f64 = 0.5;

const SIMPLICITY_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(
        "ambiguous closest-point projection at ({x:.6}, {y:.6}): query is near the medial axis, refine the mesh"
    )]
    AmbiguousProjection { x: f64, y: f64 },
    #[error("closest-point Newton iteration did not converge at ({x:.6}, {y:.6})")]
    NoConvergence { x: f64, y: f64 },
    #[error("cannot read domain file {path}: {message}")]
    Io { path: String, message: String },
}

/// The boundary parameters, as stored in domain JSON files.
///
/// ```json
/// {"type": "circle", "center": [0.0, 0.0], "radius": 1.0}
/// {"type": "ellipse", "center": [0.0, 0.0], "semi_axes": [2.0, 1.0], "rotation": 0.0}
/// {"type": "fourier_star", "center": [0.0, 0.0], "base_radius": 1.0,
///  "cos": [0.0, 0.0, 0.15], "sin": [], "rotation": 0.0}
/// {"type": "spline_loop", "points": [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]}
/// ```
///
/// `cos[i]` / `sin[i]` multiply `cos((i+1)θ)` / `sin((i+1)θ)` in the star
/// radius. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    FourierStar {
        center: [f64; 2],
        base_radius: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default)]
        rotation: f64,
    },
    SplineLoop {
        points: Vec<[f64; 2]>,
    },
}

impl DomainSpec {
    pub fn from_json_str(text: &str) -> Result<Self, GeometryError> {
        serde_json::from_str(text).map_err(|e| {
            GeometryError::InvalidDomain(format!(
                "domain spec parse error at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text).map_err(|e| match e {
            GeometryError::InvalidDomain(m) => {
                GeometryError::InvalidDomain(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    /// The same shape rigidly rotated by `angle` about its own center.
    pub fn rotated(&self, angle: f64) -> DomainSpec {
        match self.clone() {
            DomainSpec::Circle { .. } => self.clone(),
            DomainSpec::Ellipse {
                center,
                semi_axes,
                rotation,
            } => DomainSpec::Ellipse {
                center,
                semi_axes,
                rotation: rotation + angle,
            },
            DomainSpec::FourierStar {
                center,
                base_radius,
                cos,
                sin,
                rotation,
            } => DomainSpec::FourierStar {
                center,
                base_radius,
                cos,
                sin,
                rotation: rotation + angle,
            },
            DomainSpec::SplineLoop { points } => {
                let n = points.len().max(1) as f64;
                let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
                let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
                let (s, c) = angle.sin_cos();
                let points = points
                    .iter()
                    .map(|p| {
                        let (dx, dy) = (p[0] - cx, p[1] - cy);
                        [cx + c * dx - s * dy, cy + s * dx + c * dy]
                    })
                    .collect();
                DomainSpec::SplineLoop { points }
            }
        }
    }

    /// The same shape translated by `offset`.
    pub fn translated(&self, offset: [f64; 2]) -> DomainSpec {
        let shift = |c: [f64; 2]| [c[0] + offset[0], c[1] + offset[1]];
        match self.clone() {
            DomainSpec::Circle { center, radius } => DomainSpec::Circle {
                center: shift(center),
                radius,
            },
            DomainSpec::Ellipse {
                center,
                semi_axes,
                rotation,
            } => DomainSpec::Ellipse {
                center: shift(center),
                semi_axes,
                rotation,
            },
            DomainSpec::FourierStar {
                center,
                base_radius,
                cos,
                sin,
                rotation,
            } => DomainSpec::FourierStar {
                center: shift(center),
                base_radius,
                cos,
                sin,
                rotation,
            },
            DomainSpec::SplineLoop { points } => DomainSpec::SplineLoop {
                points: points.into_iter().map(shift).collect(),
            },
        }
    }
}

/// Result of a full boundary query at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryQuery {
    pub signed_distance: f64,
    pub closest_point: Point2<f64>,
    /// Outward unit normal at the closest point.
    pub normal: Vector2<f64>,
    pub curvature: f64,
    /// Curve parameter of the closest point, normalized to `[0, 1)`.
    pub parameter: f64,
}

/// Outcome of [`BoundaryDescriptor::reach_margin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReachReport {
    pub band_width: f64,
    pub max_abs_curvature: f64,
    /// `band_width * max |curvature|`.
    pub margin: f64,
    pub safety_factor: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    p: Point2<f64>,
}

/// Bounding circle of a run of [`CHUNK`] consecutive samples.
#[derive(Debug, Clone, Copy)]
struct Chunk {
    center: Point2<f64>,
    radius: f64,
}

const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy)]
struct Footpoint {
    t: f64,
    point: CurvePoint,
    distance: f64,
}

/// A closed C² boundary with cached seeding samples. Immutable once built.
#[derive(Debug, Clone)]
pub struct BoundaryDescriptor {
    spec: DomainSpec,
    curve: Curve,
    samples: Vec<Sample>,
    chunks: Vec<Chunk>,
    max_sample_gap: f64,
    diameter: f64,
}

impl BoundaryDescriptor {
    /// Validates the domain description (positivity, simplicity, orientation) and caches
    /// the seeding polyline.
    pub fn new(spec: DomainSpec) -> Result<Self, GeometryError> {
        let curve = match &spec {
            DomainSpec::Circle { center, radius } => {
                check_finite(center, "center")?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::InvalidDomain(format!(
                        "circle radius must be positive, got {radius}"
                    )));
                }
                Curve::Circle {
                    center: Point2::from(*center),
                    radius: *radius,
                }
            }
            DomainSpec::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                check_finite(center, "center")?;
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0)
                    || !semi_axes.iter().all(|a| a.is_finite())
                {
                    return Err(GeometryError::InvalidDomain(format!(
                        "ellipse semi-axes must be positive, got {semi_axes:?}"
                    )));
                }
                Curve::Ellipse {
                    center: Point2::from(*center),
                    semi_axes: *semi_axes,
                    rotation: *rotation,
                }
            }
            DomainSpec::FourierStar {
                center,
                base_radius,
                cos,
                sin,
                rotation,
            } => {
                check_finite(center, "center")?;
                let n = 8 * SEED_SAMPLES;
                let min_r = (0..n)
                    .map(|i| star_radius(*base_radius, cos, sin, i as f64 * TAU / n as f64).0)
                    .fold(f64::INFINITY, f64::min);
                if !(min_r > 0.0) {
                    return Err(GeometryError::InvalidDomain(format!(
                        "fourier star radius must stay positive, sampled minimum {min_r}"
                    )));
                }
                Curve::FourierStar {
                    center: Point2::from(*center),
                    base_radius: *base_radius,
                    cos: cos.clone(),
                    sin: sin.clone(),
                    rotation: *rotation,
                }
            }
            DomainSpec::SplineLoop { points } => {
                let mut pts: Vec<Point2<f64>> = points.iter().map(|p| Point2::from(*p)).collect();
                if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                    return Err(GeometryError::InvalidDomain(
                        "spline loop has non-finite control points".into(),
                    ));
                }
                if pts.len() > 1 && pts.first() == pts.last() {
                    pts.pop();
                }
                let mut curve = PeriodicSpline::new(&pts)?;
                if polyline_area(&sample_polyline(&Curve::Spline(curve.clone()), 512)) < 0.0 {
                    log::warn!("spline loop is clockwise; reversing control points");
                    pts.reverse();
                    curve = PeriodicSpline::new(&pts)?;
                }
                Curve::Spline(curve)
            }
        };

        let check = sample_polyline(&curve, SIMPLICITY_SAMPLES);
        if polyline_area(&check) <= 0.0 {
            return Err(GeometryError::InvalidDomain(
                "boundary must be counter-clockwise with positive area".into(),
            ));
        }
        if let Some((i, j)) = first_self_intersection(&check) {
            return Err(GeometryError::InvalidDomain(format!(
                "boundary is not simple: polyline segments {i} and {j} intersect"
            )));
        }

        let period = curve.period();
        let samples: Vec<Sample> = (0..SEED_SAMPLES)
            .map(|i| {
                let t = period * i as f64 / SEED_SAMPLES as f64;
                Sample {
                    t,
                    p: curve.eval(t).position,
                }
            })
            .collect();
        let max_sample_gap = (0..samples.len())
            .map(|i| (samples[(i + 1) % samples.len()].p - samples[i].p).norm())
            .fold(0.0, f64::max);
        let diameter = approximate_diameter(&samples);
        let chunks = samples
            .chunks(CHUNK)
            .map(|run| {
                let center = Point2::from(run.iter().map(|s| s.p.coords).sum::<Vector2<f64>>() / run.len() as f64);
                let radius = run.iter().map(|s| (s.p - center).norm()).fold(0.0, f64::max);
                Chunk { center, radius }
            })
            .collect();
        Ok(Self {
            spec,
            curve,
            samples,
            chunks,
            max_sample_gap,
            diameter,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::new(DomainSpec::from_path(path)?)
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self, GeometryError> {
        Self::new(DomainSpec::Circle { center, radius })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Largest distance between two boundary points (sampled).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Axis-aligned bounds of the sampled boundary, `(min, max)`.
    pub fn bounding_box(&self) -> (Point2<f64>, Point2<f64>) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.samples {
            lo = lo.inf(&s.p);
            hi = hi.sup(&s.p);
        }
        (lo, hi)
    }

    /// Evaluates the curve at a normalized parameter in `[0, 1)`.
    pub fn point_at(&self, parameter: f64) -> CurvePoint {
        self.curve.eval(parameter * self.curve.period())
    }

    /// `n` equally spaced (in parameter) boundary points.
    pub fn polyline(&self, n: usize) -> Vec<Point2<f64>> {
        sample_polyline(&self.curve, n)
    }

    /// Signed distance `phi(x)`: negative inside, positive outside.
    ///
    /// The distance itself is unique even where the footpoint is not, so this
    /// does not report [`GeometryError::AmbiguousProjection`].
    pub fn signed_distance(&self, x: &Point2<f64>) -> Result<f64, GeometryError> {
        if let Curve::Circle { center, radius } = &self.curve {
            return Ok((x - center).norm() - radius);
        }
        let (best, _) = self.footpoints(x)?;
        Ok(self.sign_at(x, &best) * best.distance)
    }

    /// Closest point `pi(x)` on the boundary.
    pub fn closest_point(&self, x: &Point2<f64>) -> Result<Point2<f64>, GeometryError> {
        Ok(self.query(x)?.closest_point)
    }

    /// Gradient of the signed distance, i.e. the outward unit normal at `pi(x)`.
    pub fn distance_gradient(&self, x: &Point2<f64>) -> Result<Vector2<f64>, GeometryError> {
        Ok(self.query(x)?.normal)
    }

    /// Signed curvature at (the projection of) a boundary point.
    pub fn curvature_at(&self, boundary_point: &Point2<f64>) -> Result<f64, GeometryError> {
        Ok(self.query(boundary_point)?.curvature)
    }

    /// Full query: distance, footpoint, normal, curvature and parameter.
    pub fn query(&self, x: &Point2<f64>) -> Result<BoundaryQuery, GeometryError> {
        if let Curve::Circle { center, radius } = &self.curve {
            let d = x - center;
            let rho = d.norm();
            if rho <= AMBIGUITY_SEPARATION * self.diameter {
                return Err(GeometryError::AmbiguousProjection { x: x.x, y: x.y });
            }
            let normal = d / rho;
            let theta = d.y.atan2(d.x).rem_euclid(TAU);
            return Ok(BoundaryQuery {
                signed_distance: rho - radius,
                closest_point: center + normal * *radius,
                normal,
                curvature: 1.0 / radius,
                parameter: (theta / TAU).min(1.0 - f64::EPSILON),
            });
        }
        let (best, others) = self.footpoints(x)?;
        let sep = AMBIGUITY_SEPARATION * self.diameter;
        let gap = AMBIGUITY_DISTANCE_GAP * self.diameter;
        for other in &others {
            if (other.point.position - best.point.position).norm() > sep
                && (other.distance - best.distance).abs() < gap
            {
                return Err(GeometryError::AmbiguousProjection { x: x.x, y: x.y });
            }
        }
        let period = self.curve.period();
        Ok(BoundaryQuery {
            signed_distance: self.sign_at(x, &best) * best.distance,
            closest_point: best.point.position,
            normal: best.point.outward_normal(),
            curvature: best.point.curvature(),
            parameter: (best.t.rem_euclid(period) / period).min(1.0 - f64::EPSILON),
        })
    }

    /// Checks `band_width * max|curvature| < safety_factor` on a dense sample.
    ///
    /// Passing means the closest-point projection is single-valued on the
    /// band as far as local curvature is concerned. The default safety factor
    /// is [`DEFAULT_REACH_SAFETY`].
    pub fn reach_margin(&self, band_width: f64, safety_factor: f64) -> ReachReport {
        let max_abs_curvature = self.max_abs_curvature();
        let margin = band_width * max_abs_curvature;
        ReachReport {
            band_width,
            max_abs_curvature,
            margin,
            safety_factor,
            pass: margin < safety_factor,
        }
    }

    /// Largest sampled `|curvature|` along the boundary.
    pub fn max_abs_curvature(&self) -> f64 {
        if let Curve::Circle { radius, .. } = &self.curve {
            return 1.0 / radius;
        }
        let period = self.curve.period();
        let n = 4 * SEED_SAMPLES;
        (0..n)
            .map(|i| self.curve.eval(period * i as f64 / n as f64).curvature().abs())
            .fold(0.0, f64::max)
    }

    /// Sign of `phi` at `x` from the outward normal at its footpoint.
    fn sign_at(&self, x: &Point2<f64>, foot: &Footpoint) -> f64 {
        let s = (x - foot.point.position).dot(&foot.point.outward_normal());
        if s < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Best footpoint plus every other polished candidate.
    fn footpoints(&self, x: &Point2<f64>) -> Result<(Footpoint, Vec<Footpoint>), GeometryError> {
        let n = self.samples.len();
        let dist2 = |i: usize| (self.samples[i].p - x).norm_squared();
        // Only chunks whose bounding circle comes within the cutoff below can
        // hold the nearest sample or a seed.
        let bounds: Vec<(f64, f64)> = self
            .chunks
            .iter()
            .map(|c| {
                let d = (c.center - x).norm();
                ((d - c.radius).max(0.0), d + c.radius)
            })
            .collect();
        let best_upper = bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
        let reach = best_upper + 2.0 * self.max_sample_gap + 1e-12 * self.diameter;
        let near: Vec<usize> = (0..bounds.len()).filter(|&c| bounds[c].0 <= reach).collect();
        let min_d2 = near
            .iter()
            .flat_map(|&c| c * CHUNK..((c + 1) * CHUNK).min(n))
            .map(dist2)
            .fold(f64::INFINITY, f64::min);
        // A sampled local minimum can only beat the best sample if it lies
        // within one sample gap of it.
        let cutoff = (min_d2.sqrt() + 2.0 * self.max_sample_gap).powi(2);
        let mut seeds = Vec::new();
        for i in near.iter().flat_map(|&c| c * CHUNK..((c + 1) * CHUNK).min(n)) {
            let d = dist2(i);
            if d <= cutoff && d <= dist2((i + n - 1) % n) && d <= dist2((i + 1) % n) {
                seeds.push(i);
            }
        }
        let mut polished = Vec::with_capacity(seeds.len());
        for i in seeds {
            polished.push(self.polish(x, i)?);
        }
        let best_idx = polished
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance.partial_cmp(&b.1.distance).unwrap())
            .map(|(i, _)| i)
            .expect("at least one sampled local minimum");
        let best = polished.swap_remove(best_idx);
        Ok((best, polished))
    }

    /// Safeguarded Newton on `f(t) = |gamma(t) - x|^2 / 2` around sample `i`.
    fn polish(&self, x: &Point2<f64>, i: usize) -> Result<Footpoint, GeometryError> {
        let period = self.curve.period();
        let dt = period / self.samples.len() as f64;
        let t0 = self.samples[i].t;
        let grad = |t: f64| {
            let c = self.curve.eval(t);
            let r = c.position - x;
            (r.dot(&c.d1), c.d1.norm_squared() + r.dot(&c.d2), c)
        };
        let tol = NEWTON_TOLERANCE * self.diameter;

        let (mut lo, mut hi) = (t0 - dt, t0 + dt);
        let (g_lo, _, _) = grad(lo);
        let (g_hi, _, _) = grad(hi);
        let bracketed = g_lo <= 0.0 && g_hi >= 0.0;

        let mut t = t0;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (g, h, c) = grad(t);
            if g == 0.0 {
                return Ok(self.footpoint(x, t, c));
            }
            if bracketed {
                if g < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            let mut next = if h > 0.0 { t - g / h } else { f64::NAN };
            if bracketed && !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            } else if !next.is_finite() {
                // Concave spot without a bracket: step downhill by a sample.
                next = t - dt * g.signum();
            }
            let step = (next - t).abs() * c.d1.norm();
            t = next;
            if step < tol || (bracketed && (hi - lo) * c.d1.norm() < tol) {
                // Two plain Newton steps take the converged parameter to
                // rounding level, so nearby queries give nearby footpoints.
                for _ in 0..2 {
                    let (g, h, _) = grad(t);
                    let next = t - g / h;
                    if h > 0.0 && (next - t).abs() * c.d1.norm() < tol {
                        t = next;
                    }
                }
                let c = self.curve.eval(t);
                return Ok(self.footpoint(x, t, c));
            }
        }
        Err(GeometryError::NoConvergence { x: x.x, y: x.y })
    }

    fn footpoint(&self, x: &Point2<f64>, t: f64, point: CurvePoint) -> Footpoint {
        Footpoint {
            t,
            point,
            distance: (point.position - x).norm(),
        }
    }
}

fn check_finite(p: &[f64; 2], what: &str) -> Result<(), GeometryError> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::InvalidDomain(format!("{what} must be finite")))
    }
}

fn sample_polyline(curve: &Curve, n: usize) -> Vec<Point2<f64>> {
    let period = curve.period();
    (0..n)
        .map(|i| curve.eval(period * i as f64 / n as f64).position)
        .collect()
}

fn polyline_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

fn approximate_diameter(samples: &[Sample]) -> f64 {
    let stride = (samples.len() / 256).max(1);
    let sub: Vec<Point2<f64>> = samples.iter().step_by(stride).map(|s| s.p).collect();
    let mut best = 0.0f64;
    for (i, a) in sub.iter().enumerate() {
        for b in &sub[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

fn first_self_intersection(pts: &[Point2<f64>]) -> Option<(usize, usize)> {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn orient(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

#[cfg(test)]
mod tests;
