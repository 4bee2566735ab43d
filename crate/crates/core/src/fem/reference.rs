//! Lagrange elements of order 1..=4 on the reference triangle with
//! equispaced nodes.
//!
//! Node `a` has a barycentric multi-index `alpha` with `|alpha| = k`,
//! position `alpha / k`, and shape function
//! `N_a = prod_i P_{alpha_i}(lambda_i)` where
//! `P_m(s) = prod_{j<m} (k s - j) / (j + 1)`.
//!
//! Node order: the three vertices, then the interior nodes of edges
//! 0 -> 1, 1 -> 2, 2 -> 0 (each walked from its first vertex), then the
//! interior nodes of the triangle.

use nalgebra::{Point2, Vector2};
use std::sync::OnceLock;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unsupported element order {0} (supported: 1..={MAX_ORDER})")]
pub struct UnsupportedOrder(pub usize);

/// Where a node sits on the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLocation {
    Vertex(usize),
    /// Edge `e` joins local vertices `e` and `(e + 1) % 3`; `step` counts
    /// lattice steps from vertex `e`, in `1..k`.
    Edge { edge: usize, step: usize },
    Interior(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    pub order: usize,
    /// Barycentric multi-indices, summing to `order`.
    pub multi_indices: Vec<[usize; 3]>,
    pub nodes: Vec<Point2<f64>>,
    pub locations: Vec<NodeLocation>,
}

impl ReferenceElement {
    pub fn new(k: usize) -> Result<Self, UnsupportedOrder> {
        if !(1..=MAX_ORDER).contains(&k) {
            return Err(UnsupportedOrder(k));
        }
        let mut multi_indices = Vec::new();
        let mut locations = Vec::new();
        for v in 0..3 {
            let mut a = [0; 3];
            a[v] = k;
            multi_indices.push(a);
            locations.push(NodeLocation::Vertex(v));
        }
        for e in 0..3 {
            let (i, j) = (e, (e + 1) % 3);
            for step in 1..k {
                let mut a = [0; 3];
                a[i] = k - step;
                a[j] = step;
                multi_indices.push(a);
                locations.push(NodeLocation::Edge { edge: e, step });
            }
        }
        let mut interior = 0;
        for a1 in 1..k {
            for a2 in 1..k - a1 {
                let a0 = k - a1 - a2;
                if a0 >= 1 {
                    multi_indices.push([a0, a1, a2]);
                    locations.push(NodeLocation::Interior(interior));
                    interior += 1;
                }
            }
        }
        let nodes = multi_indices
            .iter()
            .map(|a| Point2::new(a[1] as f64 / k as f64, a[2] as f64 / k as f64))
            .collect();
        Ok(Self {
            order: k,
            multi_indices,
            nodes,
            locations,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_interior(&self) -> usize {
        (self.order - 1) * (self.order.saturating_sub(2)) / 2
    }

    /// All shape function values at `x`.
    pub fn values(&self, x: &Point2<f64>) -> Vec<f64> {
        let lambda = [1.0 - x.x - x.y, x.x, x.y];
        let table = self.factor_table(&lambda);
        self.multi_indices
            .iter()
            .map(|a| table[0][a[0]].0 * table[1][a[1]].0 * table[2][a[2]].0)
            .collect()
    }

    /// All shape function gradients (with respect to reference coordinates)
    /// at `x`.
    pub fn gradients(&self, x: &Point2<f64>) -> Vec<Vector2<f64>> {
        let lambda = [1.0 - x.x - x.y, x.x, x.y];
        let table = self.factor_table(&lambda);
        // d lambda / d(x, y) for the three barycentric coordinates.
        let dl = [Vector2::new(-1.0, -1.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
        self.multi_indices
            .iter()
            .map(|a| {
                let (p0, d0) = table[0][a[0]];
                let (p1, d1) = table[1][a[1]];
                let (p2, d2) = table[2][a[2]];
                dl[0] * (d0 * p1 * p2) + dl[1] * (p0 * d1 * p2) + dl[2] * (p0 * p1 * d2)
            })
            .collect()
    }

    /// `table[i][m] = (P_m(lambda_i), P_m'(lambda_i))` for `m = 0..=k`.
    fn factor_table(&self, lambda: &[f64; 3]) -> [Vec<(f64, f64)>; 3] {
        let k = self.order as f64;
        let row = |s: f64| {
            let mut out = Vec::with_capacity(self.order + 1);
            let (mut p, mut dp) = (1.0, 0.0);
            out.push((p, dp));
            for j in 0..self.order {
                let factor = (k * s - j as f64) / (j as f64 + 1.0);
                let dfactor = k / (j as f64 + 1.0);
                dp = dp * factor + p * dfactor;
                p *= factor;
                out.push((p, dp));
            }
            out
        };
        [row(lambda[0]), row(lambda[1]), row(lambda[2])]
    }
}

/// Shorthand for [`ReferenceElement::new`].
pub fn reference_element(k: usize) -> Result<ReferenceElement, UnsupportedOrder> {
    ReferenceElement::new(k)
}

/// Process-wide instance of the order-`k` element.
pub fn shared_reference(k: usize) -> Result<&'static ReferenceElement, UnsupportedOrder> {
    static ELEMENTS: OnceLock<Vec<ReferenceElement>> = OnceLock::new();
    if !(1..=MAX_ORDER).contains(&k) {
        return Err(UnsupportedOrder(k));
    }
    let all = ELEMENTS.get_or_init(|| (1..=MAX_ORDER).map(|k| ReferenceElement::new(k).unwrap()).collect());
    Ok(&all[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (mut x, mut y): (f64, f64) = (rng.random(), rng.random());
                if x + y > 1.0 {
                    (x, y) = (1.0 - x, 1.0 - y);
                }
                Point2::new(x, y)
            })
            .collect()
    }

    #[test]
    fn node_counts() {
        for (k, n) in [(1, 3), (2, 6), (3, 10), (4, 15)] {
            let e = reference_element(k).unwrap();
            assert_eq!(e.n_nodes(), n);
            assert_eq!(
                e.locations.iter().filter(|l| matches!(l, NodeLocation::Interior(_))).count(),
                e.n_interior()
            );
        }
        assert!(reference_element(0).is_err());
        assert!(reference_element(5).is_err());
    }

    #[test]
    fn linear_shape_functions_are_barycentric() {
        let e = reference_element(1).unwrap();
        for p in random_points(20, 1) {
            let n = e.values(&p);
            assert!((n[0] - (1.0 - p.x - p.y)).abs() < 1e-15);
            assert!((n[1] - p.x).abs() < 1e-15);
            assert!((n[2] - p.y).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_property() {
        for k in 1..=MAX_ORDER {
            let e = reference_element(k).unwrap();
            for (b, z) in e.nodes.iter().enumerate() {
                for (a, v) in e.values(z).into_iter().enumerate() {
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-13, "k={k} a={a} b={b}: {v}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_gradient_consistency() {
        for k in 1..=MAX_ORDER {
            let e = reference_element(k).unwrap();
            for p in random_points(100, k as u64) {
                let s: f64 = e.values(&p).iter().sum();
                assert!((s - 1.0).abs() < 1e-13);
                let g: Vector2<f64> = e.gradients(&p).iter().sum();
                assert!(g.norm() < 1e-12, "k={k}: {g:?}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for k in 1..=MAX_ORDER {
            let e = reference_element(k).unwrap();
            for p in random_points(10, 10 + k as u64) {
                let g = e.gradients(&p);
                let (xp, xm) = (e.values(&(p + Vector2::new(h, 0.0))), e.values(&(p - Vector2::new(h, 0.0))));
                let (yp, ym) = (e.values(&(p + Vector2::new(0.0, h))), e.values(&(p - Vector2::new(0.0, h))));
                for a in 0..e.n_nodes() {
                    let fd = Vector2::new((xp[a] - xm[a]) / (2.0 * h), (yp[a] - ym[a]) / (2.0 * h));
                    assert!((fd - g[a]).norm() < 1e-7, "k={k} a={a}");
                }
            }
        }
    }

    #[test]
    fn polynomials_are_reproduced() {
        // Interpolating x^i y^j (i + j <= k) at the nodes reproduces it.
        for k in 1..=MAX_ORDER {
            let e = reference_element(k).unwrap();
            for i in 0..=k {
                for j in 0..=k - i {
                    let f = |p: &Point2<f64>| p.x.powi(i as i32) * p.y.powi(j as i32);
                    let coeffs: Vec<f64> = e.nodes.iter().map(f).collect();
                    for p in random_points(10, 99) {
                        let v: f64 = e.values(&p).iter().zip(&coeffs).map(|(n, c)| n * c).sum();
                        assert!((v - f(&p)).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn node_locations_are_consistent() {
        let e = reference_element(4).unwrap();
        let corners = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        for (z, loc) in e.nodes.iter().zip(&e.locations) {
            match *loc {
                NodeLocation::Vertex(v) => assert_eq!(*z, corners[v]),
                NodeLocation::Edge { edge, step } => {
                    let (a, b) = (corners[edge], corners[(edge + 1) % 3]);
                    let expected = a + (b - a) * (step as f64 / 4.0);
                    assert!((z - expected).norm() < 1e-15);
                }
                NodeLocation::Interior(_) => assert!(z.x > 0.0 && z.y > 0.0 && z.x + z.y < 1.0),
            }
        }
    }
}
