use super::*;
use approx::assert_relative_eq;

fn star() -> BoundaryDescriptor {
    BoundaryDescriptor::new(DomainSpec::FourierStar {
        center: [0.0, 0.0],
        base_radius: 1.0,
        cos: vec![0.0, 0.0, 0.15],
        sin: vec![],
        rotation: 0.0,
    })
    .unwrap()
}

fn star_point(theta: f64) -> Point2<f64> {
    let r = 1.0 + 0.15 * (3.0 * theta).cos();
    Point2::new(r * theta.cos(), r * theta.sin())
}

/// Brute-force nearest boundary point over 10^6 samples, then a plain Newton
/// refinement of the best sample using finite-difference derivatives.
fn star_projection_oracle(x: Point2<f64>) -> Point2<f64> {
    let n = 1_000_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let th = TAU * i as f64 / n as f64;
        let d = (star_point(th) - x).norm_squared();
        if d < best.0 {
            best = (d, th);
        }
    }
    // Bisection on a Richardson-extrapolated derivative of the squared
    // distance; the bracket is one sample spacing either side of the best
    // sample.
    let f = |th: f64| 0.5 * (star_point(th) - x).norm_squared();
    let d1 = |th: f64, h: f64| (f(th + h) - f(th - h)) / (2.0 * h);
    let g = |th: f64| (4.0 * d1(th, 5e-4) - d1(th, 1e-3)) / 3.0;
    let (mut lo, mut hi) = (best.1 - TAU / n as f64, best.1 + TAU / n as f64);
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    star_point(th)
}

#[test]
fn circle_signed_distance_examples() {
    let c = BoundaryDescriptor::circle([0.0, 0.0], 1.0).unwrap();
    assert_eq!(c.signed_distance(&Point2::new(2.0, 0.0)).unwrap(), 1.0);
    assert_eq!(c.signed_distance(&Point2::new(0.0, 0.0)).unwrap(), -1.0);
    assert_relative_eq!(
        c.signed_distance(&Point2::new(0.6, 0.8)).unwrap(),
        0.0,
        epsilon = 1e-15
    );
}

#[test]
fn circle_closest_point_and_gradient() {
    let c = BoundaryDescriptor::circle([0.0, 0.0], 1.0).unwrap();
    let p = c.closest_point(&Point2::new(2.0, 0.0)).unwrap();
    assert_relative_eq!(p, Point2::new(1.0, 0.0), epsilon = 1e-15);
    let g = c.distance_gradient(&Point2::new(0.5, 0.0)).unwrap();
    assert_relative_eq!(g, Vector2::new(1.0, 0.0), epsilon = 1e-15);
    let g = c.distance_gradient(&Point2::new(0.0, 2.0)).unwrap();
    assert_relative_eq!(g, Vector2::new(0.0, 1.0), epsilon = 1e-15);
}

#[test]
fn circle_center_projection_is_ambiguous() {
    let c = BoundaryDescriptor::circle([0.0, 0.0], 1.0).unwrap();
    assert!(matches!(
        c.closest_point(&Point2::origin()),
        Err(GeometryError::AmbiguousProjection { .. })
    ));
}

#[test]
fn ellipse_center_projection_is_ambiguous() {
    let e = BoundaryDescriptor::new(DomainSpec::Ellipse {
        center: [0.0, 0.0],
        semi_axes: [2.0, 1.0],
        rotation: 0.0,
    })
    .unwrap();
    assert!(matches!(
        e.closest_point(&Point2::origin()),
        Err(GeometryError::AmbiguousProjection { .. })
    ));
    // Still a well-defined distance.
    assert_relative_eq!(
        e.signed_distance(&Point2::origin()).unwrap(),
        -1.0,
        epsilon = 1e-12
    );
}

#[test]
fn star_projection_matches_dense_sampling_oracle() {
    let s = star();
    let x = Point2::new(1.5, 0.0);
    let oracle = star_projection_oracle(x);
    let p = s.closest_point(&x).unwrap();
    assert_relative_eq!((p - oracle).norm(), 0.0, epsilon = 1e-9);
    // (1.5, 0) lies on the symmetry axis through the lobe tip at (1.15, 0).
    assert_relative_eq!(p, Point2::new(1.15, 0.0), epsilon = 1e-12);

    for x in [Point2::new(0.3, 1.1), Point2::new(-0.7, -0.2), Point2::new(0.9, -0.9)] {
        let oracle = star_projection_oracle(x);
        let p = s.closest_point(&x).unwrap();
        assert_relative_eq!((p - oracle).norm(), 0.0, epsilon = 1e-9);
    }
}

#[test]
fn on_boundary_projection_is_identity() {
    let s = star();
    for th in [0.0, 0.4, 2.0, 5.9] {
        let x = star_point(th);
        let p = s.closest_point(&x).unwrap();
        assert_relative_eq!((p - x).norm(), 0.0, epsilon = 1e-12);
        assert!(s.signed_distance(&x).unwrap().abs() < 1e-12);
    }
}

#[test]
fn star_gradient_matches_central_differences() {
    let s = star();
    let step = 1e-6;
    for x in [Point2::new(1.3, 0.2), Point2::new(-0.6, 0.5), Point2::new(0.1, -0.95)] {
        let g = s.distance_gradient(&x).unwrap();
        let fx = (s.signed_distance(&(x + Vector2::new(step, 0.0))).unwrap()
            - s.signed_distance(&(x - Vector2::new(step, 0.0))).unwrap())
            / (2.0 * step);
        let fy = (s.signed_distance(&(x + Vector2::new(0.0, step))).unwrap()
            - s.signed_distance(&(x - Vector2::new(0.0, step))).unwrap())
            / (2.0 * step);
        assert_relative_eq!(g.x, fx, epsilon = 1e-5);
        assert_relative_eq!(g.y, fy, epsilon = 1e-5);
        assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn curvature_examples() {
    let c = BoundaryDescriptor::circle([1.0, -1.0], 2.0).unwrap();
    assert_relative_eq!(c.curvature_at(&Point2::new(3.0, -1.0)).unwrap(), 0.5, epsilon = 1e-15);

    // Analytic ellipse curvature ab / (b^2 cos^2 t + a^2 sin^2 t)^{3/2} at t = 0.
    let e = BoundaryDescriptor::new(DomainSpec::Ellipse {
        center: [0.0, 0.0],
        semi_axes: [2.0, 1.0],
        rotation: 0.0,
    })
    .unwrap();
    assert_relative_eq!(e.curvature_at(&Point2::new(2.0, 0.0)).unwrap(), 2.0, epsilon = 1e-12);
    let t: f64 = 0.7;
    let (a, b) = (2.0f64, 1.0f64);
    let k = a * b / (b * b * t.cos().powi(2) + a * a * t.sin().powi(2)).powf(1.5);
    let p = Point2::new(a * t.cos(), b * t.sin());
    assert_relative_eq!(e.curvature_at(&p).unwrap(), k, epsilon = 1e-11);
}

#[test]
fn star_curvature_matches_five_point_stencil() {
    let s = star();
    let h = 1e-3;
    for th in [0.0, 0.5, 1.0471975511965976, 2.2] {
        let p = |t: f64| star_point(t);
        let d1 = (p(th - 2.0 * h) - p(th + 2.0 * h) + (p(th + h) - p(th - h)) * 8.0) / (12.0 * h);
        let d2 = (-p(th - 2.0 * h).coords + p(th - h).coords * 16.0 - p(th).coords * 30.0
            + p(th + h).coords * 16.0
            - p(th + 2.0 * h).coords)
            / (12.0 * h * h);
        let k = (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3);
        assert_relative_eq!(s.curvature_at(&p(th)).unwrap(), k, epsilon = 1e-7);
    }
}

#[test]
fn reach_margin_examples() {
    let c = BoundaryDescriptor::circle([0.0, 0.0], 1.0).unwrap();
    let r = c.reach_margin(0.3, DEFAULT_REACH_SAFETY);
    assert!(r.pass);
    assert_relative_eq!(r.margin, 0.3, epsilon = 1e-15);
    assert!(!c.reach_margin(1.5, DEFAULT_REACH_SAFETY).pass);
    assert!(!c.reach_margin(1.5, 1.0).pass);

    // Oracle: max |kappa| of r = 1 + 0.15 cos 3θ on 10^5 samples from the
    // polar curvature formula (r^2 + 2r'^2 - r r'') / (r^2 + r'^2)^{3/2}.
    let n = 100_000;
    let kmax = (0..n)
        .map(|i| {
            let th = TAU * i as f64 / n as f64;
            let r = 1.0 + 0.15 * (3.0 * th).cos();
            let dr = -0.45 * (3.0 * th).sin();
            let ddr = -1.35 * (3.0 * th).cos();
            ((r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)).abs()
        })
        .fold(0.0, f64::max);
    let rep = star().reach_margin(0.2, DEFAULT_REACH_SAFETY);
    assert_relative_eq!(rep.max_abs_curvature, kmax, max_relative = 1e-6);
    assert_relative_eq!(rep.margin, 0.2 * kmax, max_relative = 1e-6);
    assert!(rep.pass);
}

#[test]
fn invalid_domains_are_rejected() {
    assert!(BoundaryDescriptor::circle([0.0, 0.0], -1.0).is_err());
    let bad_star = DomainSpec::FourierStar {
        center: [0.0, 0.0],
        base_radius: 0.5,
        cos: vec![0.6],
        sin: vec![],
        rotation: 0.0,
    };
    assert!(matches!(
        BoundaryDescriptor::new(bad_star),
        Err(GeometryError::InvalidDomain(_))
    ));
    // Figure-eight control polygon crosses itself.
    let eight = DomainSpec::SplineLoop {
        points: vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [1.0, -1.0], [0.0, 0.0001], [-1.0, 1.0], [-2.0, 0.0], [-1.0, -1.0]],
    };
    assert!(BoundaryDescriptor::new(eight).is_err());
}

#[test]
fn clockwise_spline_is_reoriented() {
    let cw: Vec<[f64; 2]> = (0..12)
        .map(|i| {
            let a = -(i as f64) * TAU / 12.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let s = BoundaryDescriptor::new(DomainSpec::SplineLoop { points: cw }).unwrap();
    assert!(s.signed_distance(&Point2::new(0.0, 0.0)).unwrap() < 0.0);
    assert!(s.signed_distance(&Point2::new(2.0, 0.0)).unwrap() > 0.0);
    let q = s.query(&Point2::new(1.2, 0.0)).unwrap();
    assert!(q.normal.x > 0.99);
}

#[test]
fn spline_loop_approximates_circle() {
    let pts: Vec<[f64; 2]> = (0..64)
        .map(|i| {
            let a = i as f64 * TAU / 64.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let s = BoundaryDescriptor::new(DomainSpec::SplineLoop { points: pts }).unwrap();
    let d = s.signed_distance(&Point2::new(0.3, 0.2)).unwrap();
    assert_relative_eq!(d, (0.13f64).sqrt() - 1.0, epsilon = 1e-6);
    let k = s.curvature_at(&Point2::new(0.0, 1.0)).unwrap();
    assert_relative_eq!(k, 1.0, epsilon = 1e-3);
}

#[test]
fn domain_spec_json_round_trip() {
    let text = r#"{"type":"fourier_star","center":[0.5,0.0],"base_radius":1.0,"cos":[0.0,0.0,0.15]}"#;
    let spec = DomainSpec::from_json_str(text).unwrap();
    assert_eq!(
        spec,
        DomainSpec::FourierStar {
            center: [0.5, 0.0],
            base_radius: 1.0,
            cos: vec![0.0, 0.0, 0.15],
            sin: vec![],
            rotation: 0.0,
        }
    );
    let back = DomainSpec::from_json_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    let err = DomainSpec::from_json_str(r#"{"type":"square","side":1}"#).unwrap_err();
    assert!(err.to_string().contains("line 1"));
}

#[test]
fn rotated_star_is_rotated_copy() {
    let spec = star().spec().clone();
    let angle = 0.37;
    let rot = BoundaryDescriptor::new(spec.rotated(angle)).unwrap();
    let s = star();
    let x = Point2::new(0.8, 0.5);
    let (sn, cs) = angle.sin_cos();
    let xr = Point2::new(cs * x.x - sn * x.y, sn * x.x + cs * x.y);
    assert_relative_eq!(
        s.signed_distance(&x).unwrap(),
        rot.signed_distance(&xr).unwrap(),
        epsilon = 1e-12
    );
}
