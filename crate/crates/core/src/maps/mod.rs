//! Element maps from background triangles to straight and curved triangles.
//!
//! For a retained triangle `K` with vertices ordered `u, v, w` by
//! descending signed distance (exterior vertices first):
//!
//! - the affine map `M_K` interpolates the vertex images of the meshing
//!   algorithm (projections of snapped vertices, relaxed positions of the
//!   rest);
//! - the exactly conforming map `phi_K` equals `M_K` on triangles with at
//!   most one exterior vertex, and on positively cut triangles blends the
//!   closest-point projection along the positive edge `uv` with the affine
//!   edges `uw` and `vw`:
//!
//!   ```text
//!   phi_K = [l_v pi(l_u u + (1 - l_u) v) + l_u l_w pi(u)] / (2 (1 - l_u))
//!         + [l_u pi((1 - l_v) u + l_v v) + l_v l_w pi(v)] / (2 (1 - l_v))
//!         + l_w p_h(w)
//!   ```
//!
//! - the two-stage map `psi_K` applies the same blend to the straight
//!   triangle `M_K(K)`, i.e. `psi_K = phi_{M_K(K)} o M_K`;
//! - isoparametric maps interpolate `phi_K` (flavor I) or `psi_K` (flavor J)
//!   at the Lagrange nodes of order `k`.
//!
//! Maps are parameterized by reference coordinates `(x, y)` on the unit
//! right triangle; the barycentric coordinates with respect to the
//! triangle's CCW vertex tuple are `(1 - x - y, x, y)`.

use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::ReferenceElement;
use crate::geometry::{BoundaryDescriptor, GeometryError};
use crate::mesher::ConformingMesh;

/// Reference-coordinate step for finite-difference Jacobians of the exact
/// maps.
pub const FD_STEP: f64 = 1e-6;
/// Jacobian determinants at or below this value are rejected.
pub const MIN_JACOBIAN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("CategoryThree: background triangle {0} has no vertex inside the domain")]
    CategoryThree(usize),
    #[error("NonPositiveJacobian: determinant {det:e} at reference point ({x:.6}, {y:.6}) of element {element}")]
    NonPositiveJacobian { element: usize, det: f64, x: f64, y: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Barycentric coordinates with respect to the ordered vertices `u, v, w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl Barycentric {
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }
}

/// Element map flavors used by the finite element solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    ExactConforming,
    ExactTwoStage,
    IsoparametricI,
    IsoparametricJ,
}

impl Flavor {
    pub const ALL: [Flavor; 4] = [
        Flavor::ExactConforming,
        Flavor::ExactTwoStage,
        Flavor::IsoparametricI,
        Flavor::IsoparametricJ,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Flavor::ExactConforming => "exact_conforming",
            Flavor::ExactTwoStage => "exact_two_stage",
            Flavor::IsoparametricI => "isoparametric_I",
            Flavor::IsoparametricJ => "isoparametric_J",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoFlavor {
    /// Interpolates the exactly conforming map.
    I,
    /// Interpolates the two-stage map.
    J,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Affine,
    ExactConforming,
    ExactTwoStage,
    Isoparametric { flavor: IsoFlavor, order: usize },
}

/// Per-element data shared by all maps of one conforming-mesh triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    /// Compact triangle index in the conforming mesh.
    pub element: usize,
    pub category: u8,
    /// Compact vertex ids in CCW tuple order.
    pub vertices: [usize; 3],
    /// Tuple positions of `u`, `v`, `w`.
    pub order: [usize; 3],
    /// Background coordinates of `u`, `v`, `w`.
    pub source: [Point2<f64>; 3],
    /// Images of `u`, `v`, `w` under the meshing algorithm.
    pub image: [Point2<f64>; 3],
    /// Background coordinates in tuple order (the affine map `A_K`).
    pub tuple_source: [Point2<f64>; 3],
}

impl ElementGeometry {
    pub fn new(conforming: &ConformingMesh, element: usize) -> Result<Self, MapError> {
        let vertices = conforming.mesh.triangles()[element];
        let background_triangle = conforming.triangle_ids[element];
        let category = conforming.classification.category[background_triangle];
        if category == 3 {
            return Err(MapError::CategoryThree(background_triangle));
        }
        let bg_tuple = vertices.map(|v| conforming.vertex_ids[v]);
        let ordered = conforming.classification.ordered_vertices(bg_tuple);
        let order = ordered.map(|b| bg_tuple.iter().position(|&x| x == b).unwrap());
        let source = order.map(|i| conforming.background_vertices[vertices[i]]);
        let image = order.map(|i| conforming.mesh.vertices()[vertices[i]]);
        Ok(Self {
            element,
            category,
            vertices,
            order,
            source,
            image,
            tuple_source: vertices.map(|v| conforming.background_vertices[v]),
        })
    }

    /// Barycentric coordinates `(l_u, l_v, l_w)` of a reference point.
    /// Coordinates within a few ulps of zero are flushed to zero so that
    /// lattice points on an edge evaluate the edge formula exactly.
    pub fn barycentric(&self, x: &Point2<f64>) -> Barycentric {
        let flush = |l: f64| if l.abs() < 4.0 * f64::EPSILON { 0.0 } else { l };
        let t = [flush(1.0 - x.x - x.y), flush(x.x), flush(x.y)];
        Barycentric::new(t[self.order[0]], t[self.order[1]], t[self.order[2]])
    }

    /// The background point `A_K(x)`.
    pub fn background_point(&self, x: &Point2<f64>) -> Point2<f64> {
        let [p0, p1, p2] = self.tuple_source;
        p0 + (p1 - p0) * x.x + (p2 - p0) * x.y
    }

    /// Constant Jacobian of `M_K o A_K`.
    pub fn affine_jacobian(&self) -> Matrix2<f64> {
        let img = |tuple_pos: usize| {
            let k = self.order.iter().position(|&o| o == tuple_pos).unwrap();
            self.image[k]
        };
        let (q0, q1, q2) = (img(0), img(1), img(2));
        Matrix2::from_columns(&[q1 - q0, q2 - q0])
    }
}

fn combine(b: &Barycentric, p: &[Point2<f64>; 3]) -> Point2<f64> {
    Point2::from(p[0].coords * b.u + p[1].coords * b.v + p[2].coords * b.w)
}

/// The affine map `M_K` at barycentric coordinates `b`.
pub fn eval_affine_m(g: &ElementGeometry, b: &Barycentric) -> Point2<f64> {
    combine(b, &g.image)
}

/// Blend of a projected edge with two affine edges. `edge` holds the
/// endpoints whose chord is projected; `image` the vertex images.
fn blend(
    domain: &BoundaryDescriptor,
    b: &Barycentric,
    edge: [Point2<f64>; 2],
    image: &[Point2<f64>; 3],
) -> Result<Point2<f64>, GeometryError> {
    let [pu, pv, pw] = *image;
    let [u, v] = edge;
    // Projection of the chord point s u + (1 - s) v; the endpoints reuse the
    // stored vertex images.
    let project = |s: f64| -> Result<Point2<f64>, GeometryError> {
        if s == 1.0 {
            Ok(pu)
        } else if s == 0.0 {
            Ok(pv)
        } else {
            domain.closest_point(&Point2::from(u.coords * s + v.coords * (1.0 - s)))
        }
    };
    // 1 - l_u and 1 - l_v, computed without cancellation.
    let su = b.v + b.w;
    let sv = b.u + b.w;
    let term_u = if su == 0.0 {
        pu.coords * 0.5
    } else {
        (project(b.u)?.coords * b.v + pu.coords * (b.u * b.w)) / (2.0 * su)
    };
    let term_v = if sv == 0.0 {
        pv.coords * 0.5
    } else {
        (project(1.0 - b.v)?.coords * b.u + pv.coords * (b.v * b.w)) / (2.0 * sv)
    };
    Ok(Point2::from(term_u + term_v + pw.coords * b.w))
}

/// The exactly conforming map `phi_K` at barycentric coordinates `b`.
pub fn eval_exact_phi(
    g: &ElementGeometry,
    domain: &BoundaryDescriptor,
    b: &Barycentric,
) -> Result<Point2<f64>, MapError> {
    if g.category < 2 {
        return Ok(eval_affine_m(g, b));
    }
    Ok(blend(domain, b, [g.source[0], g.source[1]], &g.image)?)
}

/// The two-stage map `psi_K = phi_{M_K(K)} o M_K` at barycentric
/// coordinates `b`. The straight triangle `M_K(K)` already has its
/// interior vertex relaxed, so that vertex is kept as is.
pub fn eval_exact_psi(
    g: &ElementGeometry,
    domain: &BoundaryDescriptor,
    b: &Barycentric,
) -> Result<Point2<f64>, MapError> {
    if g.category < 2 {
        return Ok(eval_affine_m(g, b));
    }
    Ok(blend(domain, b, [g.image[0], g.image[1]], &g.image)?)
}

/// Jacobian matrix with respect to reference coordinates, and its
/// determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub matrix: Matrix2<f64>,
    pub det: f64,
}

impl Jacobian {
    fn new(matrix: Matrix2<f64>) -> Self {
        Self {
            matrix,
            det: matrix.determinant(),
        }
    }
}

/// An evaluatable map from the reference triangle to a (possibly curved)
/// element of the conforming mesh.
#[derive(Debug, Clone)]
pub struct ElementMap<'a> {
    pub kind: MapKind,
    pub geometry: ElementGeometry,
    domain: &'a BoundaryDescriptor,
    iso: Option<(&'a ReferenceElement, Vec<Point2<f64>>)>,
}

impl<'a> ElementMap<'a> {
    /// Affine or exact map of conforming-mesh triangle `element`.
    /// Isoparametric kinds need [`build_isoparametric`].
    pub fn new(
        conforming: &ConformingMesh,
        domain: &'a BoundaryDescriptor,
        element: usize,
        kind: MapKind,
    ) -> Result<Self, MapError> {
        assert!(
            !matches!(kind, MapKind::Isoparametric { .. }),
            "use build_isoparametric for isoparametric maps"
        );
        Ok(Self {
            kind,
            geometry: ElementGeometry::new(conforming, element)?,
            domain,
            iso: None,
        })
    }

    /// Whether the map is affine on this element.
    pub fn is_affine(&self) -> bool {
        match self.kind {
            MapKind::Affine => true,
            MapKind::ExactConforming | MapKind::ExactTwoStage => self.geometry.category < 2,
            MapKind::Isoparametric { order, .. } => order == 1 || self.geometry.category < 2,
        }
    }

    /// Node images of an isoparametric map.
    pub fn node_images(&self) -> Option<&[Point2<f64>]> {
        self.iso.as_ref().map(|(_, n)| n.as_slice())
    }

    /// Image of reference point `x`.
    pub fn eval(&self, x: &Point2<f64>) -> Result<Point2<f64>, MapError> {
        let g = &self.geometry;
        match self.kind {
            MapKind::Affine => Ok(eval_affine_m(g, &g.barycentric(x))),
            MapKind::ExactConforming => eval_exact_phi(g, self.domain, &g.barycentric(x)),
            MapKind::ExactTwoStage => eval_exact_psi(g, self.domain, &g.barycentric(x)),
            MapKind::Isoparametric { .. } => {
                let (re, nodes) = self.iso.as_ref().unwrap();
                let n = re.values(x);
                Ok(Point2::from(
                    nodes
                        .iter()
                        .zip(&n)
                        .fold(Vector2::zeros(), |acc, (p, w)| acc + p.coords * *w),
                ))
            }
        }
    }

    /// Jacobian at reference point `x`: exact for affine and isoparametric
    /// maps, central differences with step [`FD_STEP`] for curved exact
    /// maps. Fails if the determinant is not positive.
    pub fn jacobian(&self, x: &Point2<f64>) -> Result<Jacobian, MapError> {
        let m = if let MapKind::Isoparametric { .. } = self.kind {
            let (re, nodes) = self.iso.as_ref().unwrap();
            re.gradients(x)
                .iter()
                .zip(nodes)
                .fold(Matrix2::zeros(), |acc, (g, p)| acc + p.coords * g.transpose())
        } else if self.is_affine() {
            self.geometry.affine_jacobian()
        } else {
            let h = FD_STEP;
            let dx = Vector2::new(h, 0.0);
            let dy = Vector2::new(0.0, h);
            let cx = (self.eval(&(x + dx))? - self.eval(&(x - dx))?) / (2.0 * h);
            let cy = (self.eval(&(x + dy))? - self.eval(&(x - dy))?) / (2.0 * h);
            Matrix2::from_columns(&[cx, cy])
        };
        let j = Jacobian::new(m);
        if j.det <= MIN_JACOBIAN {
            return Err(MapError::NonPositiveJacobian {
                element: self.geometry.element,
                det: j.det,
                x: x.x,
                y: x.y,
            });
        }
        Ok(j)
    }
}

/// Isoparametric map of order `reference.order`: the Lagrange interpolant of
/// `phi_K` (flavor I) or `psi_K` (flavor J) at the reference nodes.
pub fn build_isoparametric<'a>(
    conforming: &ConformingMesh,
    domain: &'a BoundaryDescriptor,
    element: usize,
    reference: &'a ReferenceElement,
    flavor: IsoFlavor,
) -> Result<ElementMap<'a>, MapError> {
    let geometry = ElementGeometry::new(conforming, element)?;
    let k = reference.order as f64;
    let nodes = reference
        .multi_indices
        .iter()
        .map(|a| {
            // Exact zeros on edges keep neighbouring elements' nodes identical.
            let t = a.map(|ai| ai as f64 / k);
            let b = Barycentric::new(t[geometry.order[0]], t[geometry.order[1]], t[geometry.order[2]]);
            match flavor {
                IsoFlavor::I => eval_exact_phi(&geometry, domain, &b),
                IsoFlavor::J => eval_exact_psi(&geometry, domain, &b),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ElementMap {
        kind: MapKind::Isoparametric {
            flavor,
            order: reference.order,
        },
        geometry,
        domain,
        iso: Some((reference, nodes)),
    })
}

/// The element map used by a finite element flavor.
pub fn element_map<'a>(
    conforming: &ConformingMesh,
    domain: &'a BoundaryDescriptor,
    element: usize,
    flavor: Flavor,
    reference: &'a ReferenceElement,
) -> Result<ElementMap<'a>, MapError> {
    match flavor {
        Flavor::ExactConforming => ElementMap::new(conforming, domain, element, MapKind::ExactConforming),
        Flavor::ExactTwoStage => ElementMap::new(conforming, domain, element, MapKind::ExactTwoStage),
        Flavor::IsoparametricI => build_isoparametric(conforming, domain, element, reference, IsoFlavor::I),
        Flavor::IsoparametricJ => build_isoparametric(conforming, domain, element, reference, IsoFlavor::J),
    }
}

/// Curved boundary of the exactly conforming mesh: each positive edge mapped
/// by `phi_K` (which is the closest-point projection there), sampled at
/// `samples` points.
pub fn curved_boundary(
    conforming: &ConformingMesh,
    domain: &BoundaryDescriptor,
    samples: usize,
) -> Result<Vec<Vec<Point2<f64>>>, MapError> {
    let mut out = Vec::new();
    for e in 0..conforming.mesh.n_triangles() {
        let g = ElementGeometry::new(conforming, e)?;
        if g.category != 2 {
            continue;
        }
        let line = (0..samples)
            .map(|i| {
                let s = i as f64 / (samples - 1).max(1) as f64;
                eval_exact_phi(&g, domain, &Barycentric::new(1.0 - s, s, 0.0))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(line);
    }
    Ok(out)
}
