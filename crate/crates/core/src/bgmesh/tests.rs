use super::*;
use crate::geometry::{BoundaryDescriptor, DomainSpec};
use nalgebra::Point2;

fn angles(p: &[Point2<f64>; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[(k + 1) % 3] - p[k];
        let b = p[(k + 2) % 3] - p[k];
        out[k] = (a.dot(&b) / (a.norm() * b.norm())).acos();
    }
    out
}

fn ratio(p: &[Point2<f64>; 3]) -> f64 {
    let a = (p[1] - p[0]).norm();
    let b = (p[2] - p[1]).norm();
    let c = (p[0] - p[2]).norm();
    let area = signed_area(&p[0], &p[1], &p[2]);
    let s = 0.5 * (a + b + c);
    a * b * c * s / (4.0 * area * area)
}

#[test]
fn equilateral_unit_box() {
    let m = generate_equilateral(BoundingBox::new([0.0, 0.0], [1.0, 1.0]), 1.0).unwrap();
    assert!(m.n_triangles() >= 2);
    for t in 0..m.n_triangles() {
        let p = m.triangle_points(t);
        for a in angles(&p) {
            assert!((a - std::f64::consts::FRAC_PI_3).abs() < 1e-12);
        }
        assert!((ratio(&p) - 2.0).abs() < 1e-12);
    }
    let bb = m.bounding_box();
    assert!(bb.min[0] <= 0.0 && bb.min[1] <= 0.0 && bb.max[0] >= 1.0 && bb.max[1] >= 1.0);
}

#[test]
fn equilateral_covers_box() {
    let bbox = BoundingBox::new([-2.0, -1.5], [2.5, 2.0]);
    let m = generate_equilateral(bbox, 0.3).unwrap();
    let loc = TriangleLocator::new(&m);
    for i in 0..=40 {
        for j in 0..=40 {
            let p = Point2::new(
                bbox.min[0] + bbox.width() * i as f64 / 40.0,
                bbox.min[1] + bbox.height() * j as f64 / 40.0,
            );
            assert!(loc.locate(&p, 1e-12).is_some(), "{p:?} uncovered");
        }
    }
}

#[test]
fn halving_h_quadruples_count() {
    let bbox = BoundingBox::new([-2.0, -2.0], [2.0, 2.0]);
    let coarse = generate_equilateral(bbox, 0.2).unwrap();
    let fine = generate_equilateral(bbox, 0.1).unwrap();
    let q = fine.n_triangles() as f64 / coarse.n_triangles() as f64;
    assert!((3.5..=4.5).contains(&q), "ratio {q}");
}

#[test]
fn generator_rejects_bad_input() {
    let bbox = BoundingBox::new([0.0, 0.0], [1.0, 1.0]);
    assert!(generate_equilateral(bbox, 0.0).is_err());
    assert!(generate_equilateral(bbox, f64::NAN).is_err());
    assert!(generate_equilateral(BoundingBox::new([0.0, 0.0], [0.0, 1.0]), 0.1).is_err());
}

#[test]
fn refine_single_triangle() {
    let m = TriangleMesh::new(
        vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.1), Point2::new(0.4, 1.3)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let r = refine_uniform(&m);
    assert_eq!(r.n_triangles(), 4);
    assert_eq!(r.n_vertices(), 6);
    let parent_angles = {
        let mut a = angles(&m.triangle_points(0));
        a.sort_by(f64::total_cmp);
        a
    };
    for t in 0..4 {
        assert!((r.diameter(t) - 0.5 * m.diameter(0)).abs() < 1e-14);
        assert!(r.signed_area(t) > 0.0);
        let mut a = angles(&r.triangle_points(t));
        a.sort_by(f64::total_cmp);
        for k in 0..3 {
            assert!((a[k] - parent_angles[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn refine_equilateral_stays_equilateral_and_obeys_euler() {
    let m = generate_equilateral(BoundingBox::new([0.0, 0.0], [1.0, 1.0]), 0.25).unwrap();
    let r = refine_uniform(&m);
    let r = TriangleMesh::new(r.vertices().to_vec(), r.triangles().to_vec()).unwrap();
    assert_eq!(r.n_triangles(), 4 * m.n_triangles());
    // Each old edge gains one midpoint.
    assert_eq!(r.n_vertices(), m.n_vertices() + m.edges().len());
    // Euler characteristic of a disc: V - E + F = 1.
    for mesh in [&m, &r] {
        let chi = mesh.n_vertices() as i64 - mesh.edges().len() as i64 + mesh.n_triangles() as i64;
        assert_eq!(chi, 1);
    }
    for t in 0..r.n_triangles() {
        assert!((ratio(&r.triangle_points(t)) - 2.0).abs() < 1e-10);
    }
}

#[test]
fn invariants_are_enforced() {
    let v = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0)];
    assert!(matches!(
        TriangleMesh::new(v.clone(), vec![[0, 1, 7]]),
        Err(MeshError::BadVertexId { vertex: 7, .. })
    ));
    assert!(matches!(TriangleMesh::new(v.clone(), vec![[0, 2, 1]]), Err(MeshError::NonPositiveArea(0))));
    assert!(matches!(TriangleMesh::new(v.clone(), vec![[0, 0, 1]]), Err(MeshError::RepeatedVertex(0))));
    assert!(matches!(
        TriangleMesh::new(v.clone(), vec![[0, 1, 2], [1, 2, 0]]),
        Err(MeshError::DuplicateTriangle(0, 1))
    ));
    let w = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.5, 1.0),
        Point2::new(0.5, 2.0),
        Point2::new(0.5, 3.0),
    ];
    assert!(matches!(
        TriangleMesh::new(w, vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]]),
        Err(MeshError::NonManifoldEdge(0, 1))
    ));
}

#[test]
fn immersion_examples() {
    let circle = BoundaryDescriptor::circle([0.0, 0.0], 1.0).unwrap();
    let inside = generate_equilateral(BoundingBox::new([-2.0, -2.0], [2.0, 2.0]), 0.2).unwrap();
    let rep = validate_immersion(&inside, &circle);
    assert!(rep.pass);
    assert!(rep.samples_checked > 2048);

    let half = generate_equilateral(BoundingBox::new([0.0, 0.0], [2.0, 2.0]), 0.2).unwrap();
    let rep = validate_immersion(&half, &circle);
    assert!(!rep.pass);
    assert!(rep.uncovered > 0 && !rep.examples.is_empty() && rep.examples.len() <= 10);

    let star = BoundaryDescriptor::new(DomainSpec::FourierStar {
        center: [0.0, 0.0],
        base_radius: 1.0,
        cos: vec![0.0, 0.0, 0.15],
        sin: vec![],
        rotation: 0.0,
    })
    .unwrap();
    let big = generate_equilateral(BoundingBox::new([-1.6, -1.6], [1.6, 1.6]), 0.1).unwrap();
    assert!(validate_immersion(&big, &star).pass);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let m = generate_equilateral(BoundingBox::new([-0.3, 0.1], [1.1, 0.9]), 0.1 / 3.0).unwrap();
    let shifted: Vec<_> = m
        .vertices()
        .iter()
        .map(|p| Point2::new(p.x + 1e-3 * p.y.sin(), p.y * std::f64::consts::E))
        .collect();
    let m = m.with_vertices(shifted).unwrap();
    let text = to_json_string(&m);
    let back = from_json_str(&text, "memory").unwrap();
    assert_eq!(back, m);
    for (a, b) in back.vertices().iter().zip(m.vertices()) {
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.y.to_bits(), b.y.to_bits());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    write_json(&m, &path).unwrap();
    assert_eq!(read_json(&path).unwrap(), m);
}

#[test]
fn json_reorients_clockwise_triangles() {
    let text = r#"{"vertices": [[0,0],[1,0],[0,1]], "triangles": [[0,2,1]]}"#;
    let m = from_json_str(text, "cw").unwrap();
    assert!(m.signed_area(0) > 0.0);
}

#[test]
fn json_errors_carry_context() {
    let text = "{\"vertices\": [[0,0],[1,0],[0,1]],\n \"triangles\": [[0,1,2],]}";
    match from_json_str(text, "bad.json") {
        Err(MeshFileError::Parse { path, line, .. }) => {
            assert_eq!(path, "bad.json");
            assert_eq!(line, 2);
        }
        other => panic!("unexpected {other:?}"),
    }
    let text = r#"{"vertices": [[0,0]], "triangles": [[0,1,2]]}"#;
    assert!(matches!(from_json_str(text, "x"), Err(MeshFileError::Invalid { .. })));
    let err = read_json("/nonexistent/dir/mesh.json").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/mesh.json"));
}

#[test]
fn vtk_format() {
    let m = generate_equilateral(BoundingBox::new([0.0, 0.0], [1.0, 1.0]), 0.5).unwrap();
    let u: Vec<f64> = m.vertices().iter().map(|p| p.x).collect();
    let cat: Vec<i64> = (0..m.n_triangles() as i64).collect();
    let s = vtk_string(
        m.vertices(),
        m.triangles(),
        &[VtkPointData { name: "u", values: &u }],
        &[VtkCellData { name: "category", values: &cat }],
    );
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    assert_eq!(lines[4], format!("POINTS {} double", m.n_vertices()));
    assert!(s.contains(&format!("CELLS {} {}", m.n_triangles(), 4 * m.n_triangles())));
    let types_at = lines.iter().position(|l| l.starts_with("CELL_TYPES")).unwrap();
    assert!(lines[types_at + 1..=types_at + m.n_triangles()].iter().all(|l| *l == "5"));
    assert!(lines[types_at + m.n_triangles() + 1].starts_with("CELL_DATA"));
    assert!(s.contains("SCALARS u double 1"));
    assert!(s.contains("SCALARS category int 1"));
}

#[test]
fn svg_format() {
    let m = generate_equilateral(BoundingBox::new([0.0, 0.0], [1.0, 1.0]), 0.5).unwrap();
    let bbox = BoundingBox::new([-0.5, -0.25], [1.5, 1.75]);
    let s = svg_string(&m, bbox, &[]);
    assert!(s.contains(r#"viewBox="-0.5 -0.25 2 2""#));
    assert_eq!(s.matches("<path").count(), m.n_triangles());
    let curve = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)];
    let s = svg_string(&m, bbox, &[curve]);
    assert_eq!(s.matches("<path").count(), m.n_triangles() + 1);
}
