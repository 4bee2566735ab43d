//! Closed parametric curves backing each boundary variant.
//!
//! Every curve is evaluated as `t -> (position, first derivative, second
//! derivative)` on a periodic parameter interval `[0, period)`.

use nalgebra::{DMatrix, Point2, Vector2};
use std::f64::consts::TAU;

use super::GeometryError;

/// Position and its first two parametric derivatives.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub position: Point2<f64>,
    pub d1: Vector2<f64>,
    pub d2: Vector2<f64>,
}

impl CurvePoint {
    /// Outward unit normal of a counter-clockwise curve.
    pub fn outward_normal(&self) -> Vector2<f64> {
        Vector2::new(self.d1.y, -self.d1.x).normalize()
    }

    /// Signed curvature; positive where the curve bends toward the interior.
    pub fn curvature(&self) -> f64 {
        let speed = self.d1.norm();
        (self.d1.x * self.d2.y - self.d1.y * self.d2.x) / (speed * speed * speed)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Curve {
    Circle {
        center: Point2<f64>,
        radius: f64,
    },
    Ellipse {
        center: Point2<f64>,
        semi_axes: [f64; 2],
        rotation: f64,
    },
    FourierStar {
        center: Point2<f64>,
        base_radius: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
        rotation: f64,
    },
    Spline(PeriodicSpline),
}

fn rotate(v: Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

impl Curve {
    pub fn period(&self) -> f64 {
        match self {
            Curve::Spline(s) => s.period(),
            _ => TAU,
        }
    }

    pub fn eval(&self, t: f64) -> CurvePoint {
        match self {
            Curve::Circle { center, radius } => {
                let (s, c) = t.sin_cos();
                CurvePoint {
                    position: center + Vector2::new(c, s) * *radius,
                    d1: Vector2::new(-s, c) * *radius,
                    d2: Vector2::new(-c, -s) * *radius,
                }
            }
            Curve::Ellipse {
                center,
                semi_axes: [a, b],
                rotation,
            } => {
                let (s, c) = t.sin_cos();
                CurvePoint {
                    position: center + rotate(Vector2::new(a * c, b * s), *rotation),
                    d1: rotate(Vector2::new(-a * s, b * c), *rotation),
                    d2: rotate(Vector2::new(-a * c, -b * s), *rotation),
                }
            }
            Curve::FourierStar {
                center,
                base_radius,
                cos,
                sin,
                rotation,
            } => {
                let (r, dr, ddr) = star_radius(*base_radius, cos, sin, t - rotation);
                let (s, c) = t.sin_cos();
                let radial = Vector2::new(c, s);
                let tangential = Vector2::new(-s, c);
                CurvePoint {
                    position: center + radial * r,
                    d1: radial * dr + tangential * r,
                    d2: radial * (ddr - r) + tangential * (2.0 * dr),
                }
            }
            Curve::Spline(spline) => spline.eval(t),
        }
    }
}

/// Radius `r(theta)` of a Fourier star together with `r'` and `r''`.
pub(crate) fn star_radius(base: f64, cos: &[f64], sin: &[f64], theta: f64) -> (f64, f64, f64) {
    let mut r = base;
    let mut dr = 0.0;
    let mut ddr = 0.0;
    for (i, a) in cos.iter().enumerate() {
        let n = (i + 1) as f64;
        let (s, c) = (n * theta).sin_cos();
        r += a * c;
        dr -= a * n * s;
        ddr -= a * n * n * c;
    }
    for (i, b) in sin.iter().enumerate() {
        let n = (i + 1) as f64;
        let (s, c) = (n * theta).sin_cos();
        r += b * s;
        dr += b * n * c;
        ddr -= b * n * n * s;
    }
    (r, dr, ddr)
}

/// Interpolating periodic cubic spline with chord-length knots.
#[derive(Debug, Clone)]
pub(crate) struct PeriodicSpline {
    knots: Vec<f64>,
    points: Vec<Point2<f64>>,
    // Second derivatives at the knots, per coordinate.
    moments: Vec<Vector2<f64>>,
}

impl PeriodicSpline {
    pub fn new(points: &[Point2<f64>]) -> Result<Self, GeometryError> {
        let n = points.len();
        if n < 4 {
            return Err(GeometryError::InvalidDomain(format!(
                "spline loop needs at least 4 points, got {n}"
            )));
        }
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        for i in 0..n {
            let chord = (points[(i + 1) % n] - points[i]).norm();
            if chord <= 0.0 || !chord.is_finite() {
                return Err(GeometryError::InvalidDomain(format!(
                    "spline loop has coincident consecutive points at index {i}"
                )));
            }
            knots.push(knots[i] + chord);
        }
        let h: Vec<f64> = (0..n).map(|i| knots[i + 1] - knots[i]).collect();

        // Cyclic tridiagonal system for the knot moments; n is small, so a
        // dense LU keeps this simple.
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, 2);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let h_prev = h[prev];
            let h_i = h[i];
            a[(i, prev)] += h_prev;
            a[(i, i)] += 2.0 * (h_prev + h_i);
            a[(i, next)] += h_i;
            let slope_next = (points[next] - points[i]) / h_i;
            let slope_prev = (points[i] - points[prev]) / h_prev;
            let diff = (slope_next - slope_prev) * 6.0;
            rhs[(i, 0)] = diff.x;
            rhs[(i, 1)] = diff.y;
        }
        let lu = a.lu();
        let sol = lu.solve(&rhs).ok_or_else(|| {
            GeometryError::InvalidDomain("singular spline moment system".into())
        })?;
        let moments = (0..n)
            .map(|i| Vector2::new(sol[(i, 0)], sol[(i, 1)]))
            .collect();
        Ok(Self {
            knots,
            points: points.to_vec(),
            moments,
        })
    }

    pub fn period(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> CurvePoint {
        let period = self.period();
        let t = t.rem_euclid(period);
        let n = self.points.len();
        let seg = match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        }
        .min(n - 1);
        let next = (seg + 1) % n;
        let h = self.knots[seg + 1] - self.knots[seg];
        let a = (self.knots[seg + 1] - t) / h;
        let b = (t - self.knots[seg]) / h;
        let (p0, p1) = (self.points[seg].coords, self.points[next].coords);
        let (m0, m1) = (self.moments[seg], self.moments[next]);
        let position = p0 * a
            + p1 * b
            + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        let d1 = (p1 - p0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0);
        let d2 = m0 * a + m1 * b;
        CurvePoint {
            position: Point2::from(position),
            d1,
            d2,
        }
    }
}
